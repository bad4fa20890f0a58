use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use polymp_core::dataset::{load_dataset, Sample, TEST_SPLIT};
use polymp_core::models::Model;
use serde::Serialize;

use super::eval::{check_compatible, load_checkpoint};
use crate::{write_file, CliError, Result};

#[derive(Debug, Clone, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = TEST_SPLIT)]
    pub split: String,
    /// Comma-separated sample ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ids: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct NodeSaliency {
    pub x: f64,
    pub y: f64,
    pub ring: u8,
    pub saliency: f64,
}

#[derive(Debug, Serialize)]
pub struct SaliencyMap {
    pub id: usize,
    pub label: usize,
    pub class: String,
    pub prediction: usize,
    pub predicted_class: String,
    pub nodes: Vec<NodeSaliency>,
}

pub fn saliency_map(model: &Model, sample: &Sample, class_names: &[String]) -> Result<SaliencyMap> {
    let sal = model.node_saliency(&sample.graph)?;
    let prediction = model.predict(&[&sample.graph])?[0];
    let nodes = sample
        .graph
        .nodes()
        .iter()
        .zip(sal)
        .map(|(n, s)| NodeSaliency {
            x: n[0],
            y: n[1],
            ring: n[2] as u8,
            saliency: s,
        })
        .collect();
    Ok(SaliencyMap {
        id: sample.id,
        label: sample.label,
        class: class_names[sample.label].clone(),
        prediction,
        predicted_class: class_names.get(prediction).cloned().unwrap_or_default(),
        nodes,
    })
}

/// Outline of every ring plus one circle per node; darker circles are more
/// salient.
pub fn render_svg(sample: &Sample, map: &SaliencyMap) -> String {
    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1.15 -1.15 2.3 2.3\" width=\"400\" height=\"400\">\n",
    );
    svg.push_str("<g transform=\"scale(1,-1)\">\n");
    let mut d = String::new();
    for ring in sample.polygon.rings() {
        for (i, p) in ring.vertices().iter().enumerate() {
            let _ = write!(d, "{}{:.5},{:.5} ", if i == 0 { "M" } else { "L" }, p.x, p.y);
        }
        d.push_str("Z ");
    }
    let _ = writeln!(
        svg,
        "<path d=\"{}\" fill=\"#eef2f7\" fill-rule=\"evenodd\" stroke=\"#7a8794\" stroke-width=\"0.01\"/>",
        d.trim_end()
    );
    for n in &map.nodes {
        let shade = (255.0 * (1.0 - n.saliency.clamp(0.0, 1.0))).round() as u8;
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.5}\" cy=\"{:.5}\" r=\"0.035\" fill=\"rgb({shade},{shade},{shade})\" stroke=\"#000\" stroke-width=\"0.004\"/>",
            n.x, n.y
        );
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

pub fn run(args: &SaliencyArgs) -> Result<()> {
    let (model, meta) = load_checkpoint(&args.ckpt)?;
    let ds = load_dataset(&args.data, &args.split)?;
    check_compatible(&model, &meta, &ds)?;
    for &id in &args.ids {
        let sample = ds.get(id).ok_or(CliError::SampleNotFound(id))?;
        let map = saliency_map(&model, sample, &ds.class_names)?;
        let mut json = serde_json::to_string_pretty(&map).expect("saliency serializes");
        json.push('\n');
        write_file(&args.out.join(format!("saliency_{id}.json")), &json)?;
        write_file(&args.out.join(format!("saliency_{id}.svg")), &render_svg(sample, &map))?;
        println!("{id}\t{}\t{}", map.class, map.predicted_class);
    }
    Ok(())
}
