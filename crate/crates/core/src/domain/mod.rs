//! Discrete data domains, rows, datasets (multisets), and the schema config
//! that defines them.
//!
//! A [`Domain`] is an ordered list of categorical attributes with finite
//! cardinalities. Rows are index vectors over the attributes; a [`Dataset`]
//! is a multiset of rows stored as a list so ingestion order and
//! multiplicities are preserved.

mod ingest;

pub use ingest::{dataset_to_csv, ingest_csv, quantile_bins, BinEdges, BinSource, ColumnBins};

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

/// One categorical attribute: a name plus its ordered category labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    name: String,
    labels: Vec<String>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if labels.is_empty() {
            return Err(Error::Schema(format!(
                "attribute {name:?} has an empty category list"
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Schema(format!(
                    "attribute {name:?} repeats category label {label:?}"
                )));
            }
        }
        Ok(Attribute { name, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Ordered list of attributes defining the row space. The one-hot layout
/// assigns each attribute a contiguous block of columns; blocks partition
/// `[0, onehot_width)` in attribute order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    attributes: Vec<Attribute>,
    offsets: Vec<usize>,
    width: usize,
}

impl Domain {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("domain has no attributes".into()));
        }
        let mut names = HashSet::new();
        for attr in &attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute name {:?}",
                    attr.name
                )));
            }
        }
        let mut offsets = Vec::with_capacity(attributes.len());
        let mut width = 0usize;
        for attr in &attributes {
            offsets.push(width);
            width += attr.cardinality();
        }
        Ok(Domain {
            attributes,
            offsets,
            width,
        })
    }

    /// Number of attributes (`d`).
    pub fn attr_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn onehot_width(&self) -> usize {
        self.width
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.attributes[index].cardinality()
    }

    /// Start of attribute `index`'s one-hot block.
    pub fn offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn label(&self, attr: usize, value: usize) -> &str {
        &self.attributes[attr].labels[value]
    }

    /// Total number of distinct rows, as a float (may be astronomically
    /// large; callers that enumerate must check it against a guard first).
    pub fn row_space_size(&self) -> f64 {
        self.attributes
            .iter()
            .map(|a| a.cardinality() as f64)
            .product()
    }

    pub fn validate_row(&self, row: &Row) -> Result<()> {
        if row.values().len() != self.attr_count() {
            return Err(Error::Domain(format!(
                "row has {} values, domain has {} attributes",
                row.values().len(),
                self.attr_count()
            )));
        }
        for (i, &v) in row.values().iter().enumerate() {
            if v as usize >= self.cardinality(i) {
                return Err(Error::Domain(format!(
                    "value {} out of range for attribute {:?} (cardinality {})",
                    v,
                    self.attribute(i).name(),
                    self.cardinality(i)
                )));
            }
        }
        Ok(())
    }

    /// Enumerate every row of the row space in odometer order (last
    /// attribute fastest). Intended for tiny domains only.
    pub fn enumerate_rows(&self) -> Vec<Row> {
        let d = self.attr_count();
        let mut rows = Vec::new();
        let mut current = vec![0u32; d];
        loop {
            rows.push(Row::new(current.clone()));
            let mut i = d;
            loop {
                if i == 0 {
                    return rows;
                }
                i -= 1;
                current[i] += 1;
                if (current[i] as usize) < self.cardinality(i) {
                    break;
                }
                current[i] = 0;
            }
        }
    }

    /// One-hot encode a row: a single 1.0 per attribute block.
    pub fn encode_onehot(&self, row: &Row) -> Result<Vec<f64>> {
        self.validate_row(row)?;
        let mut v = vec![0.0; self.width];
        for (i, &value) in row.values().iter().enumerate() {
            v[self.offsets[i] + value as usize] = 1.0;
        }
        Ok(v)
    }

    /// Invert [`Domain::encode_onehot`]. Every entry must be exactly 0 or 1
    /// with exactly one hot bit per attribute block.
    pub fn decode_onehot(&self, encoded: &[f64]) -> Result<Row> {
        if encoded.len() != self.width {
            return Err(Error::Domain(format!(
                "encoded vector has length {}, expected {}",
                encoded.len(),
                self.width
            )));
        }
        let mut values = Vec::with_capacity(self.attr_count());
        for (i, attr) in self.attributes.iter().enumerate() {
            let block = &encoded[self.offsets[i]..self.offsets[i] + attr.cardinality()];
            let mut hot = None;
            for (j, &x) in block.iter().enumerate() {
                if x == 1.0 {
                    if hot.is_some() {
                        return Err(Error::Domain(format!(
                            "attribute {:?} block has multiple hot bits",
                            attr.name()
                        )));
                    }
                    hot = Some(j);
                } else if x != 0.0 {
                    return Err(Error::Domain(format!(
                        "attribute {:?} block has non-binary entry {}",
                        attr.name(),
                        x
                    )));
                }
            }
            match hot {
                Some(j) => values.push(j as u32),
                None => {
                    return Err(Error::Domain(format!(
                        "attribute {:?} block has no hot bit",
                        attr.name()
                    )))
                }
            }
        }
        Ok(Row::new(values))
    }
}

/// A single record: one category index per attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row(Vec<u32>);

impl Row {
    pub fn new(values: Vec<u32>) -> Self {
        Row(values)
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn value(&self, attr: usize) -> usize {
        self.0[attr] as usize
    }
}

/// A multiset of rows over a shared domain. Stored as a list: ingestion
/// order and multiplicities are preserved exactly.
#[derive(Debug, Clone)]
pub struct Dataset {
    domain: Arc<Domain>,
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(domain: Arc<Domain>, rows: Vec<Row>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Domain("dataset must contain at least one row".into()));
        }
        for row in &rows {
            domain.validate_row(row)?;
        }
        Ok(Dataset { domain, rows })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Number of row instances, counted with multiplicity (`n`).
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of distinct rows (`u`).
    pub fn unique_count(&self) -> usize {
        self.rows.iter().collect::<HashSet<_>>().len()
    }

    /// Multiplicity of each distinct row, keyed in lexicographic row order.
    pub fn counts(&self) -> BTreeMap<&Row, u64> {
        let mut map = BTreeMap::new();
        for row in &self.rows {
            *map.entry(row).or_insert(0) += 1;
        }
        map
    }

    pub fn row_set(&self) -> HashSet<&Row> {
        self.rows.iter().collect()
    }

    pub fn contains(&self, row: &Row) -> bool {
        self.rows.iter().any(|r| r == row)
    }
}

/// Split a dataset into a target half of size ceil(n/2) and a holdout half
/// of size floor(n/2). Every row instance is assigned uniformly subject to
/// the size constraint; the multiset union of the halves is the input.
pub fn split_holdout<R: Rng + ?Sized>(
    dataset: &Dataset,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "cannot split a dataset of size {n} into two halves"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    // Fisher-Yates; the first ceil(n/2) shuffled indices form the target.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let target_size = n.div_ceil(2);
    let mut target_idx: Vec<usize> = indices[..target_size].to_vec();
    let mut holdout_idx: Vec<usize> = indices[target_size..].to_vec();
    // Keep original row order within each half.
    target_idx.sort_unstable();
    holdout_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.rows[i].clone()).collect();
    let target = Dataset::new(dataset.domain.clone(), pick(&target_idx))?;
    let holdout = Dataset::new(dataset.domain.clone(), pick(&holdout_idx))?;
    Ok((target, holdout))
}

/// Schema config as read from JSON. Each attribute is declared with exactly
/// one of `labels` (explicit categories), `cardinality` (labels "0".."c-1"),
/// or `bins` (numeric column discretized into that many equal-frequency
/// bins at ingestion, labels "bin0".."bin{B-1}").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub attributes: Vec<AttributeConfig>,
    /// Optional geographic-style hierarchy, coarse to fine, naming columns
    /// used by hierarchy baseline construction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hierarchy: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

/// A parsed schema: the domain plus ingestion directives.
#[derive(Debug, Clone)]
pub struct Schema {
    pub domain: Arc<Domain>,
    /// (attribute index, bin count) for every numeric column.
    pub binned: Vec<(usize, usize)>,
    pub hierarchy: Vec<String>,
}

/// Build a domain (plus binning directives) from a schema config. Attribute
/// order follows config order.
pub fn build_domain(config: &SchemaConfig) -> Result<Schema> {
    let mut attributes = Vec::with_capacity(config.attributes.len());
    let mut binned = Vec::new();
    for (idx, spec) in config.attributes.iter().enumerate() {
        let declared = [
            spec.labels.is_some(),
            spec.cardinality.is_some(),
            spec.bins.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if declared != 1 {
            return Err(Error::Schema(format!(
                "attribute {:?} must declare exactly one of labels, cardinality, or bins",
                spec.name
            )));
        }
        let labels = if let Some(labels) = &spec.labels {
            labels.clone()
        } else if let Some(c) = spec.cardinality {
            if c == 0 {
                return Err(Error::Schema(format!(
                    "attribute {:?} has cardinality 0",
                    spec.name
                )));
            }
            (0..c).map(|i| i.to_string()).collect()
        } else {
            let b = spec.bins.unwrap();
            if b == 0 {
                return Err(Error::Schema(format!(
                    "attribute {:?} requests 0 bins",
                    spec.name
                )));
            }
            binned.push((idx, b));
            (0..b).map(|i| format!("bin{i}")).collect()
        };
        attributes.push(Attribute::new(spec.name.clone(), labels)?);
    }
    let domain = Arc::new(Domain::new(attributes)?);
    for name in &config.hierarchy {
        if domain.attr_index(name).is_none() {
            return Err(Error::Schema(format!(
                "hierarchy column {name:?} is not a declared attribute"
            )));
        }
    }
    Ok(Schema {
        domain,
        binned,
        hierarchy: config.hierarchy.clone(),
    })
}

/// Load a schema config from a JSON file.
pub fn load_schema(path: &std::path::Path) -> Result<Schema> {
    let text = std::fs::read_to_string(path)?;
    let config: SchemaConfig = serde_json::from_str(&text)?;
    build_domain(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_domain(cards: &[usize]) -> Arc<Domain> {
        let attrs = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                Attribute::new(format!("a{i}"), (0..c).map(|v| v.to_string()).collect()).unwrap()
            })
            .collect();
        Arc::new(Domain::new(attrs).unwrap())
    }

    #[test]
    fn build_domain_sums_onehot_width() {
        let config = SchemaConfig {
            attributes: vec![
                AttributeConfig {
                    name: "SEX".into(),
                    labels: Some(vec!["M".into(), "F".into()]),
                    cardinality: None,
                    bins: None,
                },
                AttributeConfig {
                    name: "AGE".into(),
                    labels: None,
                    cardinality: Some(116),
                    bins: None,
                },
            ],
            hierarchy: vec![],
        };
        let schema = build_domain(&config).unwrap();
        assert_eq!(schema.domain.attr_count(), 2);
        assert_eq!(schema.domain.cardinality(0), 2);
        assert_eq!(schema.domain.cardinality(1), 116);
        assert_eq!(schema.domain.onehot_width(), 118);
        assert_eq!(schema.domain.offset(1), 2);
    }

    #[test]
    fn degenerate_single_category_domain_is_valid() {
        let config = SchemaConfig {
            attributes: vec![AttributeConfig {
                name: "ONLY".into(),
                labels: Some(vec!["x".into()]),
                cardinality: None,
                bins: None,
            }],
            hierarchy: vec![],
        };
        let schema = build_domain(&config).unwrap();
        assert_eq!(schema.domain.onehot_width(), 1);
    }

    #[test]
    fn duplicate_attribute_is_rejected_by_name() {
        let mk = |name: &str| AttributeConfig {
            name: name.into(),
            labels: Some(vec!["a".into(), "b".into()]),
            cardinality: None,
            bins: None,
        };
        let config = SchemaConfig {
            attributes: vec![mk("SEX"), mk("SEX")],
            hierarchy: vec![],
        };
        let err = build_domain(&config).unwrap_err();
        assert!(err.to_string().contains("SEX"), "message was {err}");
    }

    #[test]
    fn onehot_examples() {
        let domain = small_domain(&[2, 3]);
        let row = Row::new(vec![1, 2]);
        assert_eq!(
            domain.encode_onehot(&row).unwrap(),
            vec![0.0, 1.0, 0.0, 0.0, 1.0]
        );
        let decoded = domain.decode_onehot(&[1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(decoded, Row::new(vec![0, 0]));
        assert!(domain.decode_onehot(&[1.0, 1.0, 1.0, 0.0, 0.0]).is_err());
        assert!(domain.decode_onehot(&[0.0, 0.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let domain = small_domain(&[3]);
        let rows = |vals: &[u32]| vals.iter().map(|&v| Row::new(vec![v])).collect::<Vec<_>>();
        let d = Dataset::new(domain.clone(), rows(&[0, 0, 1, 2, 1])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, b) = split_holdout(&d, &mut rng).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(b.len(), 2);

        let mut rng2 = ChaCha8Rng::seed_from_u64(11);
        let (a2, b2) = split_holdout(&d, &mut rng2).unwrap();
        assert_eq!(a.rows(), a2.rows());
        assert_eq!(b.rows(), b2.rows());

        let single = Dataset::new(domain, rows(&[0])).unwrap();
        assert!(split_holdout(&single, &mut rng).is_err());
    }

    #[test]
    fn split_partition_property_many_seeds() {
        let domain = small_domain(&[4, 2]);
        let rows: Vec<Row> = (0..17)
            .map(|i| Row::new(vec![i % 4, (i / 4) % 2]))
            .collect();
        let d = Dataset::new(domain, rows).unwrap();
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = split_holdout(&d, &mut rng).unwrap();
            assert_eq!(a.len() + b.len(), d.len());
            let mut union: Vec<Row> = a.rows().to_vec();
            union.extend_from_slice(b.rows());
            union.sort();
            let mut original = d.rows().to_vec();
            original.sort();
            assert_eq!(union, original);
        }
    }

    proptest! {
        #[test]
        fn onehot_round_trip(cards in proptest::collection::vec(1usize..6, 1..5), seed in 0u64..1000) {
            let domain = small_domain(&cards);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<u32> = cards
                .iter()
                .map(|&c| rand::Rng::gen_range(&mut rng, 0..c) as u32)
                .collect();
            let row = Row::new(values);
            let encoded = domain.encode_onehot(&row).unwrap();
            prop_assert_eq!(domain.decode_onehot(&encoded).unwrap(), row);
        }
    }
}
