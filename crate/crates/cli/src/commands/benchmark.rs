use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Args;
use polymp_core::dataset::{load_dataset, Dataset, DEFAULT_SIMPLIFY_TOLERANCE, RATIOS, TEST_SPLIT};
use polymp_core::models::Arch;
use polymp_core::training::EvalReport;

use super::eval::{check_compatible, evaluate_view, load_checkpoint};
use super::train::{checkpoint_name, run_experiment, ExperimentSpec, TrainOverrides};
use crate::{write_file, CliError, Result};

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_delimiter = ',', default_values_t = Arch::ALL)]
    pub archs: Vec<Arch>,
    #[arg(long, value_delimiter = ',', default_values_t = RATIOS)]
    pub ratios: Vec<f64>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Retrain cells whose checkpoint already exists.
    #[arg(long)]
    pub force: bool,
    /// Grid cells trained concurrently; each cell is single-threaded.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = DEFAULT_SIMPLIFY_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub arch: Arch,
    pub ratio: f64,
    pub test: EvalReport,
    pub simplified: EvalReport,
}

fn run_cell(args: &BenchmarkArgs, arch: Arch, ratio: f64, test: &Dataset) -> Result<CellResult> {
    let dir = args.out.join(format!("{}_r{:02}", arch.name(), (ratio * 100.0).round() as u32));
    let ckpt = dir.join(checkpoint_name(arch.name(), ratio));
    let model = if ckpt.exists() && !args.force {
        log::info!("reusing {}", ckpt.display());
        let (model, meta) = load_checkpoint(&ckpt)?;
        check_compatible(&model, &meta, test)?;
        model
    } else {
        let spec = ExperimentSpec {
            arch,
            ratio,
            data: args.data.clone(),
            train: args.overrides.resolve(args.config.as_deref())?,
            out: dir,
            relative_only: false,
            record_time: false,
        };
        run_experiment(&spec)?.model
    };
    Ok(CellResult {
        arch,
        ratio,
        test: evaluate_view(&model, test, None)?,
        simplified: evaluate_view(&model, test, Some(args.tolerance))?,
    })
}

/// Runs every (arch, ratio) cell, `jobs` at a time, and returns results in
/// arch-alphabetical, ratio-ascending order.
pub fn run_grid(args: &BenchmarkArgs) -> Result<Vec<CellResult>> {
    let test = load_dataset(&args.data, TEST_SPLIT)?;
    let mut archs = args.archs.clone();
    archs.sort_by_key(|a| a.name());
    archs.dedup();
    let mut ratios = args.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let cells: Vec<(Arch, f64)> = archs.iter().flat_map(|&a| ratios.iter().map(move |&r| (a, r))).collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CellResult>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(arch, ratio)) = cells.get(i) else { break };
                let res = run_cell(args, arch, ratio, &test);
                results.lock().expect("results lock")[i] = Some(res);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn table(rows: &[CellResult], pick: impl Fn(&CellResult) -> &EvalReport) -> String {
    let mut out = format!("{}\n", EvalReport::CSV_HEADER);
    for r in rows {
        out.push_str(&pick(r).csv_row(r.arch.name(), Some(r.ratio)));
        out.push('\n');
    }
    out
}

pub fn run(args: &BenchmarkArgs) -> Result<()> {
    if args.archs.is_empty() || args.ratios.is_empty() {
        return Err(CliError::Config("benchmark needs at least one arch and one ratio".into()));
    }
    let rows = run_grid(args)?;
    write_file(&args.out.join("table3.csv"), &table(&rows, |r| &r.test))?;
    write_file(&args.out.join("table4.csv"), &table(&rows, |r| &r.simplified))?;

    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    for ratio in ratios {
        let best = rows
            .iter()
            .filter(|r| r.ratio == ratio)
            .max_by(|a, b| a.test.overall.total_cmp(&b.test.overall))
            .expect("ratio has rows");
        println!(
            "ratio {ratio:.1}: best O.A. {:.4} ({}), simplified {:.4}",
            best.test.overall,
            best.arch.name(),
            best.simplified.overall
        );
    }
    Ok(())
}
