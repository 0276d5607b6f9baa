//! `fedzmg data-report`: materialize a federation (from a config's data
//! section or a previously exported directory), print its label-skew
//! statistics, write them as CSV, and optionally export the raw partitions.

use anyhow::{bail, Context, Result};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fedzmg_core::data::{generate_federation, heterogeneity_report, HeterogeneityReport};
use fedzmg_core::model::Labels;

use crate::config::{build_recipe, load_config};
use crate::csvio::render_heterogeneity_csv;
use crate::federation_io::{export_federation, import_federation};
use crate::sink::ResultsSink;

#[derive(Debug)]
pub struct DataReportOutcome {
    pub report: HeterogeneityReport,
    pub csv_path: PathBuf,
    pub exported_to: Option<PathBuf>,
}

pub fn data_report(
    config_path: Option<&Path>,
    out_dir: &Path,
    export_dir: Option<&Path>,
    import_dir: Option<&Path>,
    client_filter: Option<&[usize]>,
) -> Result<DataReportOutcome> {
    let config = config_path.map(load_config).transpose()?;

    let clients = match (import_dir, &config) {
        (Some(dir), _) => {
            import_federation(dir).with_context(|| format!("importing {}", dir.display()))?
        }
        (None, Some(cfg)) => generate_federation(&build_recipe(&cfg.data))?,
        (None, None) => bail!("data-report needs --config or --import-dir"),
    };

    // Class count: the config is authoritative when present; an imported
    // federation without one infers it from the labels it actually holds.
    let classes = match &config {
        Some(cfg) => cfg.data.classes,
        None => {
            let max = clients
                .iter()
                .filter_map(|c| match &c.labels {
                    Labels::Classes(v) => v.iter().max().copied(),
                    Labels::Values(_) => None,
                })
                .max();
            match max {
                Some(m) => m + 1,
                None => bail!("imported federation holds no class labels"),
            }
        }
    };

    let selected = match client_filter {
        None => clients,
        Some(ids) => {
            let wanted: BTreeSet<usize> = ids.iter().copied().collect();
            let present: BTreeSet<usize> = clients.iter().map(|c| c.client_id).collect();
            for id in &wanted {
                if !present.contains(id) {
                    bail!(
                        "client {id} is not in this federation (ids run {}..={})",
                        present.iter().next().unwrap(),
                        present.iter().last().unwrap()
                    );
                }
            }
            clients
                .into_iter()
                .filter(|c| wanted.contains(&c.client_id))
                .collect()
        }
    };

    let report = heterogeneity_report(&selected, classes)?;
    let sink = ResultsSink::new(out_dir)?;
    let csv_path = sink.write_heterogeneity(&render_heterogeneity_csv(&report))?;

    let exported_to = match export_dir {
        Some(dir) => {
            export_federation(&selected, dir)?;
            println!("exported {} clients to {}", selected.len(), dir.display());
            Some(dir.to_path_buf())
        }
        None => None,
    };

    println!(
        "{} clients, {} classes",
        report.per_client.len(),
        classes
    );
    let agg = [
        ("volume", &report.volume),
        ("label diversity", &report.label_diversity),
        ("normalized entropy", &report.normalized_entropy),
        ("gini", &report.gini),
        ("kl divergence", &report.kl_divergence),
        ("dominant class fraction", &report.dominant_class_fraction),
    ];
    for (name, summary) in agg {
        println!("{name}: mean {:.4} std {:.4}", summary.mean, summary.std);
    }
    println!("wrote {}", csv_path.display());

    Ok(DataReportOutcome {
        report,
        csv_path,
        exported_to,
    })
}
