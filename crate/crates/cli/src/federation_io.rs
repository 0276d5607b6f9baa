//! Federation export/import as per-client CSV files plus a checksum
//! manifest — pins a generated federation to disk so tests and reruns can
//! verify they are training on byte-identical data.
//!
//! Layout: `client_<id>.csv` (header `label,x0,..,x{d-1}`) for each client,
//! and `federation_manifest.csv` with `client_id,n_k,checksum`. Features are
//! written with 17 significant digits, so import reproduces the exact bits
//! and the FNV checksum of every dataset must match the manifest.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fedzmg_core::data::ClientDataset;
use fedzmg_core::linalg::Matrix;
use fedzmg_core::model::Labels;

use crate::csvio::fmt_f64;

pub const FEDERATION_MANIFEST: &str = "federation_manifest.csv";
const MANIFEST_HEADER: &str = "client_id,n_k,checksum";

fn client_file_name(id: usize) -> String {
    format!("client_{id:04}.csv")
}

pub fn export_federation(clients: &[ClientDataset], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for client in clients {
        let labels = match &client.labels {
            Labels::Classes(v) => v,
            Labels::Values(_) => bail!(
                "client {}: only class-labeled federations can be exported",
                client.client_id
            ),
        };
        let d = client.features.cols();
        let mut out = String::from("label");
        for j in 0..d {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for (i, &label) in labels.iter().enumerate() {
            let _ = write!(out, "{label}");
            for &v in client.features.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        let path = dir.join(client_file_name(client.client_id));
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        let _ = writeln!(
            manifest,
            "{},{},{:016x}",
            client.client_id,
            client.n_k(),
            client.checksum()
        );
    }
    fs::write(dir.join(FEDERATION_MANIFEST), manifest)
        .with_context(|| format!("writing manifest in {}", dir.display()))?;
    Ok(())
}

/// Reads a federation back and verifies every client against the manifest —
/// sample counts and content checksums must match exactly.
pub fn import_federation(dir: &Path) -> Result<Vec<ClientDataset>> {
    let manifest_path = dir.join(FEDERATION_MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MANIFEST_HEADER => {}
        other => bail!("unexpected federation manifest header {other:?}"),
    }
    let mut clients = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("manifest line {}: expected 3 fields, got {}", lineno + 2, fields.len());
        }
        let client_id: usize = fields[0]
            .parse()
            .with_context(|| format!("manifest line {}: bad client_id", lineno + 2))?;
        let n_k: usize = fields[1]
            .parse()
            .with_context(|| format!("manifest line {}: bad n_k", lineno + 2))?;
        let checksum = u64::from_str_radix(fields[2], 16)
            .with_context(|| format!("manifest line {}: bad checksum", lineno + 2))?;

        let client = read_client_csv(dir, client_id)?;
        if client.n_k() != n_k {
            bail!(
                "client {client_id}: manifest says n_k = {n_k}, file has {}",
                client.n_k()
            );
        }
        if client.checksum() != checksum {
            bail!(
                "client {client_id}: checksum mismatch (manifest {checksum:016x}, file {:016x})",
                client.checksum()
            );
        }
        clients.push(client);
    }
    if clients.is_empty() {
        bail!("federation manifest in {} lists no clients", dir.display());
    }
    Ok(clients)
}

fn read_client_csv(dir: &Path, client_id: usize) -> Result<ClientDataset> {
    let path = dir.join(client_file_name(client_id));
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = match lines.next() {
        Some(h) => h,
        None => bail!("{}: empty file", path.display()),
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"label") || cols.len() < 2 {
        bail!("{}: unexpected header {header:?}", path.display());
    }
    let d = cols.len() - 1;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            bail!(
                "{} line {}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                d + 1,
                fields.len()
            );
        }
        labels.push(fields[0].parse::<usize>().with_context(|| {
            format!("{} line {}: bad label", path.display(), lineno + 2)
        })?);
        for f in &fields[1..] {
            values.push(f.parse::<f64>().with_context(|| {
                format!("{} line {}: bad feature", path.display(), lineno + 2)
            })?);
        }
    }
    let n = labels.len();
    Ok(ClientDataset {
        client_id,
        features: Matrix::from_vec(n, d, values),
        labels: Labels::Classes(labels),
    })
}
