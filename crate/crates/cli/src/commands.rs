use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use coxstream::online::Snapshot;
use coxstream::par::Execution;
use coxstream::sim::{self, ks, SimConfig};
use coxstream::{
    chisq_sf, fit_cox, full_test, linalg, DataBlock, OnlineState, SolverOptions, StreamConfig, SubjectRecord,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::ingest::{BlockReader, InputSpec, RawBlock};
use crate::record::{fmt_f64, BlockRecord, RecordSink};
use crate::{Experiment, FitArgs, OutFormat, PermuteArgs, SimulateArgs, StreamArgs, TestFullArgs};

pub enum Status {
    Clean,
    BlockErrors,
}

fn describe(raw: &RawBlock, e: &str) -> String {
    if raw.source.is_empty() {
        e.to_string()
    } else {
        format!("{}: {e}", raw.source)
    }
}

/// Reads every block and pools the valid records. Rejected blocks are
/// reported on stderr.
fn pooled_records(input: &str) -> anyhow::Result<(Vec<SubjectRecord>, bool)> {
    let mut all = Vec::new();
    let mut failed = false;
    for (i, raw) in BlockReader::open(&InputSpec::parse(input)?)?.enumerate() {
        let raw = raw?;
        match &raw.records {
            Ok(r) => all.extend(r.iter().cloned()),
            Err(e) => {
                eprintln!("block {}: {}", i + 1, describe(&raw, e));
                failed = true;
            }
        }
    }
    if all.is_empty() {
        bail!("no valid records in input");
    }
    Ok((all, failed))
}

fn status(failed: bool) -> Status {
    if failed {
        Status::BlockErrors
    } else {
        Status::Clean
    }
}

fn json_vec(v: impl IntoIterator<Item = f64>) -> serde_json::Value {
    v.into_iter().map(|x| if x.is_finite() { json!(x) } else { serde_json::Value::Null }).collect()
}

pub fn fit(args: FitArgs) -> anyhow::Result<Status> {
    let (records, failed) = pooled_records(&args.input)?;
    let data = DataBlock::new(1, records)?;
    let opts = SolverOptions { ties: args.ties, ..Default::default() };
    let fit = fit_cox(&data, &vec![0.0; data.p()], &opts)?;
    let se: Vec<f64> = match linalg::spd_inverse(&fit.information, "information") {
        Ok(v) => v.diagonal().iter().map(|x| x.sqrt()).collect(),
        Err(_) => vec![f64::NAN; data.p()],
    };
    let out = json!({
        "n": data.len(),
        "d": data.event_count(),
        "beta": json_vec(fit.beta_hat.iter().copied()),
        "se": json_vec(se),
        "log_pl": fit.log_pl,
        "score_norm": fit.score_norm,
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    println!("{out}");
    Ok(status(failed || !fit.converged))
}

pub fn test_full(args: TestFullArgs) -> anyhow::Result<Status> {
    let (records, failed) = pooled_records(&args.input)?;
    let data = DataBlock::new(1, records)?;
    let t = full_test(&data, args.model.transform, args.model.ties, args.h_mode)?;
    let out = json!({
        "n": data.len(),
        "d": data.event_count(),
        "statistic": t.statistic,
        "df": t.df,
        "p_value": t.p_value,
        "rank_deficient": t.rank_deficient,
        "transform": args.model.transform.to_string(),
    });
    println!("{out}");
    Ok(status(failed))
}

fn write_checkpoint(path: &Path, snap: &Snapshot) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, snap.to_json()?).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

pub fn stream(args: StreamArgs) -> anyhow::Result<Status> {
    let (cumulative_eval, window_eval) = args.eval_policy.points();
    let cfg = StreamConfig {
        transform: args.model.transform,
        ties: args.model.ties,
        window: args.window as usize,
        cumulative_eval,
        window_eval,
        solver: SolverOptions { ties: args.model.ties, ..Default::default() },
    };
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("alpha must lie in (0, 1)");
    }

    let mut state: Option<OnlineState> = None;
    if let Some(path) = args.checkpoint.as_deref().filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let snap = Snapshot::from_json(&text).with_context(|| format!("refusing to resume from {}", path.display()))?;
        if snap.config != cfg {
            bail!("checkpoint {} was written with a different configuration; refusing to resume", path.display());
        }
        state = Some(snap.state);
    }

    let reader = BlockReader::open(&InputSpec::parse(&args.input)?)?;
    let stdout = std::io::stdout();
    let mut sink = RecordSink::new(stdout.lock(), args.out == OutFormat::Csv);
    let mut failed = false;

    for raw in reader {
        let raw = raw?;
        let k = state.as_ref().map_or(1, |s| s.k + 1);
        let mut p = state.as_ref().map_or(0, |s| s.p);
        let record = match &raw.records {
            Err(e) => BlockRecord::failed(k, None, None, describe(&raw, e)),
            Ok(records) => {
                let n = records.len();
                let d = records.iter().filter(|r| r.status).count();
                if p == 0 {
                    p = records[0].covariates.len();
                }
                let outcome = DataBlock::new(k, records.clone()).and_then(|block| {
                    let st = match &mut state {
                        Some(st) => st,
                        None => state.insert(OnlineState::new(block.p(), cfg.window)?),
                    };
                    st.process_block(&block, &cfg)
                });
                match outcome {
                    Ok(out) => {
                        if let (Some(path), Some(st)) = (&args.checkpoint, &state) {
                            write_checkpoint(path, &Snapshot::new(cfg.clone(), st.clone()))?;
                        }
                        BlockRecord::from_outcome(&out, args.alpha)
                    }
                    Err(e) => {
                        // a first block that fails must not pin the dimension
                        if state.as_ref().is_some_and(|s| s.k == 0) {
                            state = None;
                        }
                        BlockRecord::failed(k, Some(n), Some(d), describe(&raw, &e.to_string()))
                    }
                }
            }
        };
        failed |= record.error.is_some();
        sink.write(&record, p)?;
    }
    Ok(status(failed))
}

fn sim_config(args: &SimulateArgs) -> SimConfig {
    let (cumulative_eval, window_eval) = args.eval_policy.points();
    let change_block = args.change_block.unwrap_or(if args.scenario.is_null() {
        args.blocks + 1
    } else {
        args.blocks / 2 + 1
    });
    SimConfig {
        blocks: args.blocks,
        block_size: args.block_size,
        beta: args.beta.clone(),
        lambda0: args.lambda0,
        epsilon: args.epsilon,
        scenario: args.scenario,
        change_block,
        transform: args.model.transform,
        ties: args.model.ties,
        window: args.window,
        replicates: args.replicates,
        seed: args.seed,
        alpha: args.alpha,
        cumulative_eval,
        window_eval,
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<(BufWriter<File>, String)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((BufWriter::new(file), path.display().to_string()))
}

pub fn simulate(args: SimulateArgs) -> anyhow::Result<Status> {
    let cfg = sim_config(&args);
    cfg.validate()?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    match args.experiment {
        Experiment::Stream => {
            let stdout = std::io::stdout();
            let mut w = csv::Writer::from_writer(stdout.lock());
            let mut header = vec!["time".to_string(), "status".to_string()];
            header.extend((1..=cfg.p()).map(|j| format!("x{j}")));
            header.push("block".into());
            w.write_record(&header)?;
            for k in 1..=cfg.blocks {
                let block = sim::stream_block(&cfg, args.replicate, k)?;
                for r in block.records() {
                    let mut row = vec![fmt_f64(r.time), (r.status as u8).to_string()];
                    row.extend(r.covariates.iter().map(|&x| fmt_f64(x)));
                    row.push(k.to_string());
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
        }
        Experiment::Size | Experiment::Power => {
            let (name, output, first) = if args.experiment == Experiment::Size {
                ("size", sim::size_experiment(&cfg, exec)?, (None, None))
            } else {
                let p = sim::power_experiment(&cfg, exec)?;
                ("power", p.output, (p.first_cumulative_above_half, p.first_window_above_half))
            };
            let (mut tidy, tidy_path) = create(&args.out_dir, &format!("{name}_tidy.csv"))?;
            sim::output::write_tidy_csv(&output, &mut tidy)?;
            tidy.flush()?;
            let (mut summary, summary_path) = create(&args.out_dir, &format!("{name}_summary.csv"))?;
            sim::output::write_summary_csv(&output.curve, &mut summary)?;
            summary.flush()?;
            let report = json!({
                "experiment": name,
                "replicates": cfg.replicates,
                "excluded_blocks": output.excluded,
                "first_cumulative_above_half": first.0,
                "first_window_above_half": first.1,
                "tidy_csv": tidy_path,
                "summary_csv": summary_path,
            });
            println!("{report}");
        }
        Experiment::Qq => {
            let k = cfg.blocks;
            let checkpoints = if args.checkpoints.is_empty() {
                let mut c: Vec<usize> = [k / 4, k / 2, 3 * k / 4, k].into_iter().filter(|&c| c >= 1).collect();
                c.dedup();
                c
            } else {
                args.checkpoints.clone()
            };
            let samples = sim::qq_experiment(&cfg, &checkpoints, exec)?;
            let (mut file, path) = create(&args.out_dir, "qq.csv")?;
            sim::output::write_qq_csv(&samples, &mut file)?;
            file.flush()?;
            let p = cfg.p();
            for s in &samples {
                let reference = |x: f64| 1.0 - chisq_sf(x.max(0.0), p).unwrap_or(1.0);
                let vs_chisq = ks::ks_one_sample(&s.online, reference);
                let vs_pooled = ks::ks_two_sample(&s.online, &s.pooled);
                let report = json!({
                    "k": s.k,
                    "n": s.online.len(),
                    "ks_online_vs_chisq_p": vs_chisq.p_value,
                    "ks_pooled_vs_chisq_p": ks::ks_one_sample(&s.pooled, reference).p_value,
                    "ks_online_vs_pooled_p": vs_pooled.p_value,
                    "qq_csv": path,
                });
                println!("{report}");
            }
        }
    }
    Ok(Status::Clean)
}

pub fn permute(args: PermuteArgs) -> anyhow::Result<Status> {
    let mut blocks = Vec::new();
    for raw in BlockReader::open(&InputSpec::parse(&args.input)?)? {
        let raw = raw?;
        let records = raw.records.as_ref().map_err(|e| anyhow::anyhow!(describe(&raw, e)))?;
        blocks.push(DataBlock::new(blocks.len() + 1, records.clone()).with_context(|| describe(&raw, "invalid block"))?);
    }
    let cfg = StreamConfig {
        transform: args.model.transform,
        ties: args.model.ties,
        window: args.window,
        solver: SolverOptions { ties: args.model.ties, ..Default::default() },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let r = sim::permutation_experiment(&blocks, args.n_perm, &mut rng, &cfg)?;
    let out = json!({
        "blocks": blocks.len(),
        "observed": r.observed,
        "p_value": r.p_value,
        "n_perm": args.n_perm,
        "retries": r.retries,
    });
    println!("{out}");
    Ok(Status::Clean)
}
