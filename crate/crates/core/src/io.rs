//! Text file formats.
//!
//! * Incidence file: UTF-8, comma-delimited; the first row holds event labels
//!   (after a corner cell), the first column holds actor labels, cells are `0`/`1`.
//! * Label sidecar: one 1-based heir (or component) index per line.
//! * Results directory: `draws/`, `summaries/` and `tables/` CSV files written
//!   by [`write_results`]. Floats use Rust's shortest round-trip formatting.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::diagnostics::{AveragedAllocations, ClusteringLabels, Pcm};
use crate::error::{Error, Result};
use crate::model::{Combiner, IncidenceMatrix, MembershipMatrix, MixtureWeights, ParentParams};
use crate::sampler::{Draw, PosteriorSamples};
use crate::selection::DicResult;

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.push((line, record.iter().map(|f| f.trim().to_string()).collect()));
    }
    Ok(out)
}

fn check_unique_events(path: &Path, line: usize, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for (c, label) in labels.iter().enumerate() {
        if !seen.insert(label) {
            return Err(parse_error(path, line, c + 2, format!("duplicate event label `{label}`")));
        }
    }
    Ok(())
}

pub fn read_incidence(path: impl AsRef<Path>) -> Result<IncidenceMatrix> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let Some(((header_line, header), rows)) = records.split_first() else {
        return Err(parse_error(path, 1, 1, "empty incidence file"));
    };
    let events: Vec<String> = header[1..].to_vec();
    if events.is_empty() {
        return Err(parse_error(path, *header_line, 2, "header has no event labels"));
    }
    check_unique_events(path, *header_line, &events)?;
    if rows.is_empty() {
        return Err(parse_error(path, header_line + 1, 1, "no actor rows"));
    }
    let d = events.len();
    let mut actors = Vec::with_capacity(rows.len());
    let mut cells = Vec::with_capacity(rows.len() * d);
    for (line, row) in rows {
        if row.len() != d + 1 {
            return Err(parse_error(
                path,
                *line,
                row.len().min(d + 1),
                format!("expected {} fields, found {}", d + 1, row.len()),
            ));
        }
        actors.push(row[0].clone());
        for (c, cell) in row[1..].iter().enumerate() {
            let v = match cell.as_str() {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_error(path, *line, c + 2, format!("cell `{other}` is not 0 or 1"))),
            };
            cells.push(v);
        }
    }
    let mut seen = HashSet::new();
    for ((line, _), actor) in rows.iter().zip(&actors) {
        if !seen.insert(actor) {
            return Err(parse_error(path, *line, 1, format!("duplicate actor label `{actor}`")));
        }
    }
    let y = Array2::from_shape_vec((actors.len(), d), cells).expect("rectangular by construction");
    IncidenceMatrix::new(y, actors, events)
}

pub fn write_incidence(path: impl AsRef<Path>, data: &IncidenceMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str("actor");
    for e in data.event_labels() {
        out.push(',');
        out.push_str(e);
    }
    out.push('\n');
    for (i, actor) in data.actor_labels().iter().enumerate() {
        out.push_str(actor);
        for &v in data.row(i) {
            out.push(',');
            out.push(if v == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    write_file(path.as_ref(), &out)
}

/// Reads 1-based labels, one per line, returning them 0-based.
pub fn read_labels(path: impl AsRef<Path>) -> Result<ClusteringLabels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<usize>() {
            Ok(v) if v >= 1 => labels.push(v - 1),
            _ => return Err(parse_error(path, n + 1, 1, format!("`{line}` is not a positive cluster index"))),
        }
    }
    if labels.is_empty() {
        return Err(parse_error(path, 1, 1, "no labels"));
    }
    Ok(ClusteringLabels(labels))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &ClusteringLabels) -> Result<()> {
    write_file(path.as_ref(), &labels_text(labels))
}

fn labels_text(labels: &ClusteringLabels) -> String {
    let mut out = String::new();
    for &l in &labels.0 {
        writeln!(out, "{}", l + 1).expect("string write");
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn heir_headers(components: usize) -> impl Iterator<Item = String> {
    (1..=components).map(|h| format!("h{h}"))
}

/// `(0,1)`-style membership string of a heir cluster.
pub fn membership_string(u: &MembershipMatrix, heir: usize) -> String {
    format!("({})", join(u.row(heir)))
}

/// Writes a labelled numeric matrix as CSV.
pub fn write_matrix(
    path: impl AsRef<Path>,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    m: &Array2<f64>,
) -> Result<()> {
    let mut out = format!("{corner},{}\n", col_labels.join(","));
    for (label, row) in row_labels.iter().zip(m.rows()) {
        writeln!(out, "{label},{}", join(row.iter())).expect("string write");
    }
    write_file(path.as_ref(), &out)
}

/// Reads a matrix written by [`write_matrix`], returning row labels and values.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Array2<f64>)> {
    let path = path.as_ref();
    let records = read_records(path)?;
    let Some(((_, header), rows)) = records.split_first() else {
        return Err(parse_error(path, 1, 1, "empty matrix file"));
    };
    let cols = header.len() - 1;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (line, row) in rows {
        if row.len() != cols + 1 {
            return Err(parse_error(path, *line, 1, "ragged row"));
        }
        labels.push(row[0].clone());
        for (c, cell) in row[1..].iter().enumerate() {
            values.push(
                cell.parse::<f64>()
                    .map_err(|_| parse_error(path, *line, c + 2, format!("`{cell}` is not a number")))?,
            );
        }
    }
    let m = Array2::from_shape_vec((labels.len(), cols), values).expect("rectangular by construction");
    Ok((labels, m))
}

/// Everything produced by one fit.
pub struct FitReport<'a> {
    pub data: &'a IncidenceMatrix,
    pub samples: &'a PosteriorSamples,
    pub allocations: &'a AveragedAllocations,
    pub labels: &'a ClusteringLabels,
    pub pcm: &'a Pcm,
    /// DIC of every candidate fitted; a single entry for a plain fit.
    pub dic: &'a [DicResult],
}

/// Paths of the files written by [`write_results`], relative to the output directory.
pub mod layout {
    pub const ALPHA_DRAWS: &str = "draws/alpha_star.csv";
    pub const PI_DRAWS: &str = "draws/pi.csv";
    pub const ALLOCATIONS: &str = "summaries/allocations.csv";
    pub const MAP_LABELS: &str = "summaries/map_labels.txt";
    pub const CLUSTER_SIZES: &str = "summaries/cluster_sizes.csv";
    pub const TERNARY: &str = "summaries/ternary.csv";
    pub const PCM_RAW: &str = "tables/pcm_raw.csv";
    pub const PCM_RESCALED: &str = "tables/pcm_rescaled.csv";
    pub const DIC: &str = "tables/dic.csv";
    pub const MANIFEST: &str = "manifest.toml";
}

pub fn write_results(out_dir: impl AsRef<Path>, report: &FitReport<'_>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    let u = report.samples.membership();
    let heirs: Vec<String> = heir_headers(u.heirs()).collect();
    let actors = report.data.actor_labels();
    let mut written = Vec::new();
    let mut emit = |rel: &str, contents: String| -> Result<()> {
        let path = dir.join(rel);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };

    emit(layout::ALPHA_DRAWS, alpha_draws_csv(report.samples))?;
    emit(layout::PI_DRAWS, pi_draws_csv(report.samples, report.data.event_labels()))?;

    let mut alloc = format!("actor,{}\n", heirs.join(","));
    for (a, row) in actors.iter().zip(report.allocations.0.rows()) {
        writeln!(alloc, "{a},{}", join(row.iter())).expect("string write");
    }
    emit(layout::ALLOCATIONS, alloc)?;

    emit(layout::MAP_LABELS, labels_text(report.labels))?;

    let mut sizes = String::from("heir,membership,units\n");
    for (h, count) in report.labels.sizes(u.heirs()).iter().enumerate() {
        writeln!(sizes, "{},\"{}\",{count}", h + 1, membership_string(&u, h)).expect("string write");
    }
    emit(layout::CLUSTER_SIZES, sizes)?;

    let cond = crate::diagnostics::conditional_on_nonempty(report.allocations);
    let mut ternary = format!("actor,map_heir,{}\n", heirs[1..].join(","));
    for ((a, row), l) in actors.iter().zip(cond.rows()).zip(&report.labels.0) {
        writeln!(ternary, "{a},{},{}", l + 1, join(row.iter())).expect("string write");
    }
    emit(layout::TERNARY, ternary)?;

    for (rel, m) in [(layout::PCM_RAW, &report.pcm.raw), (layout::PCM_RESCALED, &report.pcm.rescaled)] {
        let mut s = format!("cluster,{}\n", heirs.join(","));
        for (h, row) in m.rows().into_iter().enumerate() {
            writeln!(s, "{},{}", heirs[h], join(row.iter())).expect("string write");
        }
        emit(rel, s)?;
    }

    emit(layout::DIC, dic_table_csv(report.dic))?;
    Ok(written)
}

pub fn dic_table_csv(results: &[DicResult]) -> String {
    let best = crate::selection::select_lowest(results);
    let mut s = String::from("k,dic,expected_log_likelihood,log_phat,retained,selected\n");
    for (idx, r) in results.iter().enumerate() {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.parents,
            r.dic,
            r.expected_deviance_term,
            r.log_phat_term,
            r.retained,
            Some(idx) == best
        )
        .expect("string write");
    }
    s
}

fn alpha_draws_csv(samples: &PosteriorSamples) -> String {
    let heirs = 1 << samples.parents;
    let mut s = format!("draw,{}\n", join(heir_headers(heirs)));
    for (t, d) in samples.draws.iter().enumerate() {
        writeln!(s, "{},{}", t + 1, join(d.alpha_star.as_slice())).expect("string write");
    }
    s
}

fn pi_draws_csv(samples: &PosteriorSamples, events: &[String]) -> String {
    let mut s = format!("draw,parent,{}\n", events.join(","));
    for (t, d) in samples.draws.iter().enumerate() {
        for (k, row) in d.pi.as_array().rows().into_iter().enumerate() {
            writeln!(s, "{},{},{}", t + 1, k + 1, join(row.iter())).expect("string write");
        }
    }
    s
}

/// Reloads the parameter draws of a results directory. Allocations are not
/// stored, so every returned draw has an empty `z_star`.
pub fn read_draws(out_dir: impl AsRef<Path>, parents: usize, combiner: Combiner) -> Result<PosteriorSamples> {
    let dir = out_dir.as_ref();
    let u = MembershipMatrix::new(parents)?;
    let alpha_path = dir.join(layout::ALPHA_DRAWS);
    let (_, alphas) = read_matrix(&alpha_path)?;
    if alphas.ncols() != u.heirs() {
        return Err(parse_error(
            &alpha_path,
            1,
            1,
            format!("expected {} heir columns, found {}", u.heirs(), alphas.ncols()),
        ));
    }
    let pi_path = dir.join(layout::PI_DRAWS);
    let (_, pis) = read_matrix(&pi_path)?;
    // the first value column holds the parent index
    if pis.nrows() != alphas.nrows() * parents {
        return Err(parse_error(
            &pi_path,
            1,
            1,
            format!("expected {} rows, found {}", alphas.nrows() * parents, pis.nrows()),
        ));
    }
    let mut draws = Vec::with_capacity(alphas.nrows());
    for (t, alpha) in alphas.rows().into_iter().enumerate() {
        let block = pis.slice(ndarray::s![t * parents..(t + 1) * parents, 1..]).to_owned();
        draws.push(Draw {
            alpha_star: MixtureWeights::new(alpha.to_vec())?,
            pi: ParentParams::new(block)?,
            z_star: Vec::new(),
        });
    }
    Ok(PosteriorSamples {
        parents,
        combiner,
        draws,
        allocation_sums: None,
    })
}
