//! CSV ingestion with schema-driven label mapping and equal-frequency
//! discretization of numeric columns.

use super::{Dataset, Row, Schema};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

/// Discretization boundaries for one numeric column. `upper_edges[b]` is the
/// largest raw value assigned to bin `b`; a raw value maps to the first bin
/// whose upper edge is >= the value (values beyond the last edge clamp to
/// the last bin). `None` marks a bin with an empty prefix, which can occur
/// when there are fewer values than bins.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ColumnBins {
    pub n_bins: usize,
    pub upper_edges: Vec<Option<f64>>,
}

impl ColumnBins {
    pub fn bin_of(&self, value: f64) -> usize {
        for (b, edge) in self.upper_edges.iter().enumerate() {
            if let Some(e) = edge {
                if value <= *e {
                    return b;
                }
            }
        }
        self.n_bins - 1
    }
}

/// Sidecar file mapping column names to their bin edges, persisted so a
/// target dataset and its baselines share one discretization.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct BinEdges {
    pub columns: BTreeMap<String, ColumnBins>,
}

impl BinEdges {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::util::atomic_write(path, text.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Where discretization boundaries come from during ingestion.
#[derive(Debug, Clone)]
pub enum BinSource {
    /// Compute equal-frequency edges from the ingested file itself.
    Compute,
    /// Reuse previously persisted edges (cross-dataset consistency).
    Sidecar(BinEdges),
    /// The file is already discretized: binned columns hold bin labels.
    Labels,
}

fn parse_numeric(raw: &str, column: &str, record_idx: usize) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Ingest(format!(
            "row {}, column {column:?}: non-numeric value {raw:?} in binned column",
            record_idx + 2
        ))),
    }
}

/// Equal-frequency (quantile) bin edges for a column. Bin `b` covers sorted
/// positions `[floor(b*n/B), floor((b+1)*n/B))`; ties are broken by value
/// order, so every copy of a value lands in the earliest bin that contains
/// that value.
pub fn quantile_bins(values: &[f64], n_bins: usize) -> ColumnBins {
    assert!(n_bins >= 1, "need at least one bin");
    assert!(!values.is_empty(), "need at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in binned column"));
    let n = sorted.len();
    let mut upper_edges = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let cut = (b + 1) * n / n_bins;
        if cut == 0 {
            upper_edges.push(None);
        } else {
            upper_edges.push(Some(sorted[cut - 1]));
        }
    }
    ColumnBins { n_bins, upper_edges }
}

/// Ingest a CSV with a header row into a dataset over `schema`'s domain.
///
/// Columns are matched to attributes by name; extra CSV columns are ignored.
/// Numeric columns declared with `bins` in the schema are discretized
/// according to `source`. Returns the dataset and, when edges were computed
/// here, the sidecar to persist.
pub fn ingest_csv(
    path: &Path,
    schema: &Schema,
    source: BinSource,
) -> Result<(Dataset, Option<BinEdges>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?
        .clone();
    let domain = &schema.domain;

    // Attribute index -> CSV column position.
    let mut col_of_attr = Vec::with_capacity(domain.attr_count());
    for attr in domain.attributes() {
        let pos = headers
            .iter()
            .position(|h| h == attr.name())
            .ok_or_else(|| {
                Error::Ingest(format!("column {:?} missing from CSV header", attr.name()))
            })?;
        col_of_attr.push(pos);
    }

    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Ingest(format!("row {}: {e}", i + 2)))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Ingest(format!("{}: no data rows", path.display())));
    }

    let binned: HashMap<usize, usize> = match source {
        BinSource::Labels => HashMap::new(),
        _ => schema.binned.iter().copied().collect(),
    };

    // Resolve bin edges per binned column.
    let mut edges: BTreeMap<String, ColumnBins> = BTreeMap::new();
    let computed = matches!(source, BinSource::Compute);
    if let BinSource::Sidecar(sidecar) = &source {
        for (&attr_idx, &n_bins) in &binned {
            let name = domain.attribute(attr_idx).name();
            let col = sidecar.columns.get(name).ok_or_else(|| {
                Error::Ingest(format!("sidecar has no bin edges for column {name:?}"))
            })?;
            if col.n_bins != n_bins {
                return Err(Error::Ingest(format!(
                    "sidecar declares {} bins for column {name:?}, schema declares {}",
                    col.n_bins, n_bins
                )));
            }
            edges.insert(name.to_string(), col.clone());
        }
    } else if computed {
        for (&attr_idx, &n_bins) in &binned {
            let name = domain.attribute(attr_idx).name();
            let col_pos = col_of_attr[attr_idx];
            let mut values = Vec::with_capacity(records.len());
            for (i, record) in records.iter().enumerate() {
                let raw = record.get(col_pos).unwrap_or("");
                values.push(parse_numeric(raw, name, i)?);
            }
            edges.insert(name.to_string(), quantile_bins(&values, n_bins));
        }
    }

    // Label lookup tables for categorical columns.
    let label_maps: Vec<HashMap<&str, u32>> = domain
        .attributes()
        .iter()
        .map(|a| {
            a.labels()
                .iter()
                .enumerate()
                .map(|(i, l)| (l.as_str(), i as u32))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let mut values = Vec::with_capacity(domain.attr_count());
        for (attr_idx, &col_pos) in col_of_attr.iter().enumerate() {
            let name = domain.attribute(attr_idx).name();
            let raw = record.get(col_pos).unwrap_or("");
            let value = if let Some(&n_bins) = binned.get(&attr_idx) {
                let v = parse_numeric(raw, name, i)?;
                let col_bins = &edges[name];
                debug_assert_eq!(col_bins.n_bins, n_bins);
                col_bins.bin_of(v) as u32
            } else {
                *label_maps[attr_idx].get(raw).ok_or_else(|| {
                    Error::Ingest(format!(
                        "row {}, column {name:?}: unknown label {raw:?}",
                        i + 2
                    ))
                })?
            };
            values.push(value);
        }
        rows.push(Row::new(values));
    }

    let dataset = Dataset::new(domain.clone(), rows)?;
    let sidecar = if computed && !edges.is_empty() {
        Some(BinEdges { columns: edges })
    } else {
        None
    };
    Ok((dataset, sidecar))
}

/// Write a dataset as a label-valued CSV (header = attribute names). The
/// output re-ingests under the same schema with [`BinSource::Labels`].
pub fn dataset_to_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let domain = dataset.domain();
    let mut buf = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        writer.write_record(domain.attributes().iter().map(|a| a.name()))?;
        for row in dataset.rows() {
            writer.write_record(
                row.values()
                    .iter()
                    .enumerate()
                    .map(|(a, &v)| domain.label(a, v as usize)),
            )?;
        }
        writer.flush()?;
    }
    crate::util::atomic_write(path, &buf)?;
    Ok(())
}
