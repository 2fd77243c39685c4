pub mod attack;
pub mod baseline;
pub mod evaluate;
pub mod oracle;

use anyhow::{bail, Context, Result};
use recon_core::{BinEdges, BinSource, Dataset, Schema};
use std::path::{Path, PathBuf};

/// Ingest a dataset CSV under a schema. `labels` marks pre-discretized
/// files; `bins` points at a persisted edge sidecar. When edges are computed
/// here they are persisted to `out_dir/bin_edges.json` for reuse.
pub fn read_dataset(
    data: &Path,
    schema: &Schema,
    labels: bool,
    bins: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<Dataset> {
    let source = if labels {
        BinSource::Labels
    } else if let Some(path) = bins {
        let edges = BinEdges::load(path)
            .with_context(|| format!("loading bin edges from {}", path.display()))?;
        BinSource::Sidecar(edges)
    } else {
        BinSource::Compute
    };
    let (dataset, sidecar) = recon_core::ingest_csv(data, schema, source)
        .with_context(|| format!("ingesting {}", data.display()))?;
    if let (Some(sidecar), Some(out_dir)) = (sidecar, out_dir) {
        sidecar.save(&out_dir.join("bin_edges.json"))?;
    }
    Ok(dataset)
}

/// File stem used as a method/dataset label in reports.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    recon_core::util::atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// Parse `--init uniform` / `--init dataset:<path>`.
pub enum InitSpec {
    Uniform,
    DatasetPath(PathBuf),
}

pub fn parse_init(spec: &str) -> Result<InitSpec> {
    if spec == "uniform" {
        return Ok(InitSpec::Uniform);
    }
    if let Some(path) = spec.strip_prefix("dataset:") {
        if path.is_empty() {
            bail!("--init dataset: requires a path");
        }
        return Ok(InitSpec::DatasetPath(PathBuf::from(path)));
    }
    bail!("--init must be `uniform` or `dataset:<path>`, got {spec:?}");
}
