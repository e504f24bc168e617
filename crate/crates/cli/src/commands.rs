use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use manet_core::diagnostics::{
    adjusted_rand_index, average_allocations, map_allocate, misclassification_rate, posterior_confusion_matrix,
    relabel_chain,
};
use manet_core::experiment::{score_baseline, score_overlapping, ReplicateOutcome, Summary};
use manet_core::io::{self, FitReport};
use manet_core::{
    dic3, generate_dataset, run_chain, scan_k, AveragedAllocations, DicResult, IncidenceMatrix, MembershipMatrix,
    Pcm, PosteriorSamples,
};
use rayon::prelude::*;

use crate::config::Config;
use crate::manifest::{InputFile, RunManifest};
use crate::{Overrides, UsageError};

/// Loads the configuration and applies the chain-level flags.
fn load(o: &Overrides) -> Result<Config> {
    let mut cfg = Config::load(o.config.as_deref())?;
    if let Some(v) = o.iterations {
        cfg.chain.iterations = v;
    }
    if let Some(v) = o.burn_in {
        cfg.chain.burn_in = v;
    }
    if let Some(v) = &o.out {
        cfg.output = Some(v.clone());
    }
    Ok(cfg)
}

fn heir_labels(u: &MembershipMatrix) -> Vec<String> {
    (1..=u.heirs()).map(|h| format!("h{h}")).collect()
}

fn summarise(data: &IncidenceMatrix, samples: PosteriorSamples, dic: &[DicResult], relabel: bool, out: &Path) -> Result<()> {
    let samples = if relabel { relabel_chain(&samples)? } else { samples };
    let allocations = match samples.running_average_allocations() {
        Some(avg) => AveragedAllocations(avg),
        None => average_allocations(&samples, data)?,
    };
    let labels = map_allocate(&allocations);
    let pcm = posterior_confusion_matrix(&samples, data)?;
    io::write_results(
        out,
        &FitReport {
            data,
            samples: &samples,
            allocations: &allocations,
            labels: &labels,
            pcm: &pcm,
            dic,
        },
    )?;

    let u = samples.membership();
    println!("{:>6}  {:<12} {:>6}", "heir", "membership", "units");
    for (h, size) in labels.sizes(u.heirs()).iter().enumerate() {
        println!("{:>6}  {:<12} {:>6}", h + 1, io::membership_string(&u, h), size);
    }
    Ok(())
}

fn read_data(path: &Path) -> Result<(IncidenceMatrix, InputFile)> {
    let data = io::read_incidence(path)?;
    Ok((data, InputFile::digest(path)?))
}

pub fn fit(data_path: &Path, o: &Overrides) -> Result<()> {
    let mut cfg = load(o)?;
    if let Some(v) = o.seed {
        cfg.chain.seed = v;
    }
    if let Some(v) = o.k {
        cfg.chain.k = v;
    }
    let out = cfg.output()?.to_path_buf();
    let started = Instant::now();
    let (data, input) = read_data(data_path)?;
    let chain = cfg.chain.chain_config(cfg.chain.k, data.d())?;
    let samples = run_chain(&data, &chain)?;
    let dic = dic3(&samples, &data)?;
    println!("K = {}: DIC = {:.3}", chain.parents, dic.dic);
    summarise(&data, samples, &[dic], cfg.chain.relabel, &out)?;

    let mut manifest = RunManifest::new("fit", chain.seed, started.elapsed(), &cfg);
    manifest.parents = Some(chain.parents);
    manifest.input = Some(input);
    manifest.write(&out)?;
    Ok(())
}

pub fn select_k(data_path: &Path, o: &Overrides, candidates: Option<Vec<usize>>) -> Result<()> {
    let mut cfg = load(o)?;
    if let Some(v) = o.seed {
        cfg.chain.seed = v;
    }
    if o.k.is_some() {
        return Err(UsageError("select-k takes --candidates, not --k".into()).into());
    }
    if let Some(c) = candidates {
        cfg.chain.candidates = c;
    }
    let first = *cfg
        .chain
        .candidates
        .first()
        .ok_or_else(|| UsageError("no candidate values of K given".into()))?;
    let out = cfg.output()?.to_path_buf();
    let started = Instant::now();
    let (data, input) = read_data(data_path)?;
    let template = cfg.chain.chain_config(first, data.d())?;
    for &k in &cfg.chain.candidates {
        cfg.chain.chain_config(k, data.d())?;
    }
    let scan = scan_k(&data, &cfg.chain.candidates, &template)?;
    print!("{}", io::dic_table_csv(&scan.results));
    println!("selected K = {}", scan.selected);
    summarise(&data, scan.best, &scan.results, cfg.chain.relabel, &out)?;

    let mut manifest = RunManifest::new("select-k", template.seed, started.elapsed(), &cfg);
    manifest.parents = Some(scan.selected);
    manifest.input = Some(input);
    manifest.write(&out)?;
    Ok(())
}

fn pcm_table(pcm: &Pcm, heirs: &[String]) -> String {
    let mut s = format!("{:>8}", "");
    for h in heirs {
        write!(s, "{h:>8}").unwrap();
    }
    s.push('\n');
    for (h, row) in pcm.rescaled.rows().into_iter().enumerate() {
        write!(s, "{:>8}", heirs[h]).unwrap();
        for v in row {
            write!(s, "{v:>8.3}").unwrap();
        }
        writeln!(s, "   (n = {})", pcm.row_units[h]).unwrap();
    }
    s
}

pub fn pcm(run: &Path, data_path: &Path, out: Option<&Path>) -> Result<()> {
    let started = Instant::now();
    let stored = RunManifest::read(run)?;
    let parents = stored
        .parents
        .ok_or_else(|| UsageError(format!("{} holds no stored chain", run.display())))?;
    let combiner = stored.config.chain.combiner()?;
    let (data, input) = read_data(data_path)?;
    if let Some(recorded) = &stored.input {
        if recorded.sha256 != input.sha256 {
            eprintln!(
                "warning: {} differs from the data the run was fitted to ({})",
                data_path.display(),
                recorded.path.display()
            );
        }
    }
    let samples = io::read_draws(run, parents, combiner)?;
    let pcm = posterior_confusion_matrix(&samples, &data)?;
    let heirs = heir_labels(&samples.membership());
    print!("{}", pcm_table(&pcm, &heirs));

    if let Some(out) = out {
        io::write_matrix(out.join(io::layout::PCM_RAW), "cluster", &heirs, &heirs, &pcm.raw)?;
        io::write_matrix(out.join(io::layout::PCM_RESCALED), "cluster", &heirs, &heirs, &pcm.rescaled)?;
        let mut manifest = RunManifest::new("pcm", stored.seed, started.elapsed(), &stored.config);
        manifest.parents = Some(parents);
        manifest.input = Some(input);
        manifest.config.output = Some(out.to_path_buf());
        manifest.write(out)?;
    }
    Ok(())
}

pub fn evaluate(truth: &Path, estimate: &Path, k: Option<usize>) -> Result<()> {
    let truth = io::read_labels(truth)?;
    let estimate = io::read_labels(estimate)?;
    let largest = truth.0.iter().chain(&estimate.0).max().copied().unwrap_or(0);
    let parents = match k {
        Some(k) => k,
        None => (usize::BITS - largest.leading_zeros()).max(1) as usize,
    };
    if largest >= 1 << parents.min(16) {
        return Err(UsageError(format!("label {} exceeds the 2^{parents} heirs of K = {parents}", largest + 1)).into());
    }
    let mis = misclassification_rate(&estimate, &truth, parents)?;
    let ari = adjusted_rand_index(&estimate, &truth)?;
    println!("misclassification,{mis}");
    println!("ari,{ari}");
    Ok(())
}

pub fn compare(o: &Overrides, replicates: Option<usize>, components: Option<usize>) -> Result<()> {
    let mut cfg = load(o)?;
    if let Some(v) = o.seed {
        cfg.simulation.seed = v;
        cfg.chain.seed = v;
    }
    if let Some(v) = o.k {
        cfg.simulation.k = v;
    }
    if let Some(v) = replicates {
        cfg.compare.replicates = v;
    }
    if let Some(v) = components {
        cfg.compare.components = v;
    }
    let out = cfg.output()?.to_path_buf();
    let started = Instant::now();

    let mut rows = String::from("d,replicate,model,misclassification,ari\n");
    let mut table = String::from("d,model,misclassification_mean,misclassification_se,ari_mean,ari_se\n");
    println!("{:>4}  {:<10} {:>20} {:>16}", "d", "model", "misclassification %", "ARI");
    for &d in &cfg.compare.events {
        let chain = cfg.chain.chain_config(cfg.simulation.k, d)?;
        let outcomes: Vec<(ReplicateOutcome, ReplicateOutcome)> = (0..cfg.compare.replicates)
            .into_par_iter()
            .map(|r| -> Result<_> {
                let sim = generate_dataset(&cfg.simulation.sim_config(d, cfg.simulation.seed.wrapping_add(r as u64))?)?;
                let chain = chain.clone().with_seed(chain.seed.wrapping_add(r as u64));
                let manet = score_overlapping(&sim, &chain).with_context(|| format!("d = {d}, replicate {}", r + 1))?;
                let baseline = score_baseline(&sim, cfg.compare.components, &chain)
                    .with_context(|| format!("d = {d}, replicate {} (baseline)", r + 1))?;
                Ok((manet, baseline))
            })
            .collect::<Result<_>>()?;
        for (r, (m, b)) in outcomes.iter().enumerate() {
            writeln!(rows, "{d},{},manet,{},{}", r + 1, m.misclassification, m.ari).unwrap();
            writeln!(rows, "{d},{},baseline,{},{}", r + 1, b.misclassification, b.ari).unwrap();
        }
        for (model, pick) in [("manet", 0), ("baseline", 1)] {
            let chosen: Vec<&ReplicateOutcome> = outcomes.iter().map(|p| if pick == 0 { &p.0 } else { &p.1 }).collect();
            let mis = Summary::of(&chosen.iter().map(|o| 100.0 * o.misclassification).collect::<Vec<_>>());
            let ari = Summary::of(&chosen.iter().map(|o| o.ari).collect::<Vec<_>>());
            writeln!(table, "{d},{model},{},{},{},{}", mis.mean, mis.se, ari.mean, ari.se).unwrap();
            println!(
                "{d:>4}  {model:<10} {:>12.2} ({:>5.2}) {:>8.3} ({:.3})",
                mis.mean, mis.se, ari.mean, ari.se
            );
        }
    }
    write(&out.join("tables/compare.csv"), &table)?;
    write(&out.join("tables/compare_replicates.csv"), &rows)?;
    RunManifest::new("compare", cfg.simulation.seed, started.elapsed(), &cfg).write(&out)?;
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(o: &Overrides, n: Option<usize>, d: Option<usize>) -> Result<()> {
    let mut cfg = load(o)?;
    if let Some(v) = o.seed {
        cfg.simulation.seed = v;
    }
    if let Some(v) = o.k {
        cfg.simulation.k = v;
    }
    if let Some(v) = n {
        cfg.simulation.n = v;
    }
    if let Some(v) = d {
        cfg.simulation.d = v;
    }
    let out = cfg.output()?.to_path_buf();
    let started = Instant::now();
    let sim = generate_dataset(&cfg.simulation.sim_config(cfg.simulation.d, cfg.simulation.seed)?)?;
    io::write_incidence(out.join("data.csv"), &sim.data)?;
    io::write_labels(out.join("truth.txt"), &sim.true_labels)?;
    let parents: Vec<String> = (1..=cfg.simulation.k).map(|k| format!("k{k}")).collect();
    io::write_matrix(out.join("truth_pi.csv"), "parent", &parents, sim.data.event_labels(), sim.true_pi.as_array())?;
    RunManifest::new("simulate", cfg.simulation.seed, started.elapsed(), &cfg).write(&out)?;

    let u = MembershipMatrix::new(cfg.simulation.k)?;
    println!("{:>6}  {:<12} {:>6}", "heir", "membership", "units");
    for (h, size) in sim.true_labels.sizes(u.heirs()).iter().enumerate() {
        println!("{:>6}  {:<12} {:>6}", h + 1, io::membership_string(&u, h), size);
    }
    Ok(())
}
