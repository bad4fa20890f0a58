use std::path::PathBuf;

use clap::Args;
use polymp_core::dataset::{generate_all, save_generated, GenConfig, CLASS_NAMES};

use crate::Result;

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',', default_values_t = CLASS_NAMES.map(String::from))]
    pub classes: Vec<String>,
    /// Training samples per class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Test samples per class, spread evenly over O/R/SC/SH.
    #[arg(long, default_value_t = 40)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra collinear vertices inserted per edge.
    #[arg(long, default_value_t = 3)]
    pub densify: usize,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenDataArgs {
    pub fn config(&self) -> GenConfig {
        GenConfig {
            classes: self.classes.clone(),
            per_class: self.per_class,
            test_per_class: self.test_per_class,
            seed: self.seed,
            densify: self.densify,
            ..GenConfig::default()
        }
    }
}

pub fn run(args: &GenDataArgs) -> Result<()> {
    let cfg = args.config();
    let data = generate_all(&cfg)?;
    let manifest = save_generated(&args.out, &data, &cfg)?;
    for s in &manifest.splits {
        println!("{}\t{}", s.file, s.total);
    }
    Ok(())
}
