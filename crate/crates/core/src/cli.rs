//! Command-line surface: vectorize, morph, scoring, mask dumps, rendering
//! and batch metrics. Config files mirror flag names; flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::constraint::{
    boxes_to_masks, coverage_response_maps, gs_loss, load_external_maps, MAP_RES,
};
use crate::delaunay::delaunay;
use crate::error::{Error, Result};
use crate::eval::{batch_bleu, batch_miou, EvalReport};
use crate::layout::LayoutAnnotation;
use crate::maintain::{build_anchors, glyph_distance, skst_loss_and_gradient};
use crate::morph::{
    assign_components, optimize, trace_csv, GammaSchedule, GuidanceSpec, MorphConfig,
};
use crate::ogv::{vectorize, OgvParams, VectorGlyph};
use crate::raster::{binarize, load_pgm, otsu_threshold, save_pgm, GrayImage};
use crate::render::{render, RenderParams};
use crate::svg::{emit_svg, parse_svg};

#[derive(Parser)]
#[command(
    name = "oraclevec",
    version,
    about = "Glyph vectorization and structure-constrained vector morphing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace a raster glyph into a cubic-spline SVG
    Vectorize(VectorizeArgs),
    /// Deform a vector glyph toward a layout annotation
    Morph(MorphArgs),
    /// Skeleton-structure loss between an original and a deformed glyph
    ScoreSkst(ScoreSkstArgs),
    /// Region-structure loss breakdown for a glyph or response maps
    ScoreGs(ScoreGsArgs),
    /// Dump the binary box masks for a layout
    Masks(MasksArgs),
    /// Rasterize an SVG glyph to a PGM coverage image
    Render(RenderArgs),
    /// Batch mean-IoU over JSON-lines of layout pairs
    EvalMiou(EvalFileArgs),
    /// Batch BLEU-4 over JSON-lines of caption pairs
    EvalBleu(EvalFileArgs),
    /// Outline distance between glyph pairs
    EvalDistance(EvalDistanceArgs),
}

/// JSON config mirroring the flag names; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    threshold: Option<f64>,
    auto_threshold: Option<bool>,
    invert: Option<bool>,
    stroke_width: Option<f64>,
    window: Option<usize>,
    tolerance: Option<f64>,
    spacing: Option<f64>,
    steps: Option<usize>,
    learning_rate: Option<f64>,
    w_gs: Option<f64>,
    beta: Option<f64>,
    gamma_peak: Option<f64>,
    gamma_peak_step: Option<usize>,
    topk: Option<usize>,
    map_sigma: Option<f64>,
    fd_step: Option<f64>,
    fd_subset: Option<usize>,
    fd_resolution: Option<usize>,
    seed: Option<u64>,
    canvas: Option<usize>,
    supersample: Option<usize>,
    guidance_image: Option<PathBuf>,
    guidance_weight: Option<f64>,
    gradient_dir: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = read_text(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Args)]
struct VectorizeArgs {
    /// Input raster glyph (PGM/PBM, bright foreground)
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Binarization threshold in (0,1)
    #[arg(long)]
    threshold: Option<f64>,
    /// Pick the threshold automatically
    #[arg(long)]
    auto_threshold: bool,
    /// Treat dark pixels as foreground
    #[arg(long)]
    invert: bool,
    /// Fixed stroke half-width in pixels; estimated when omitted
    #[arg(long)]
    stroke_width: Option<f64>,
    /// Normal smoothing window (odd)
    #[arg(long)]
    window: Option<usize>,
    /// Spline fitting tolerance in pixels
    #[arg(long)]
    tolerance: Option<f64>,
    /// Skeleton resampling spacing in pixels
    #[arg(long)]
    spacing: Option<f64>,
}

#[derive(Args)]
struct MorphArgs {
    /// Input glyph SVG
    glyph: PathBuf,
    /// Layout annotation JSON
    layout: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    w_gs: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Peak tone weight of the ramp schedule
    #[arg(long)]
    gamma_peak: Option<f64>,
    /// Step at which the tone weight reaches its peak
    #[arg(long)]
    gamma_peak_step: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    /// Gaussian width in constraint cells for coverage-map smoothing
    #[arg(long)]
    map_sigma: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    fd_subset: Option<usize>,
    #[arg(long)]
    fd_resolution: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grayscale target image guidance
    #[arg(long)]
    guidance_image: Option<PathBuf>,
    #[arg(long)]
    guidance_weight: Option<f64>,
    /// Directory of per-step gradient sidecars
    #[arg(long)]
    gradient_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreSkstArgs {
    original: PathBuf,
    deformed: PathBuf,
}

#[derive(Args)]
struct ScoreGsArgs {
    layout: PathBuf,
    /// External response maps JSON (label to rows)
    #[arg(long, conflicts_with = "glyph")]
    maps: Option<PathBuf>,
    /// Glyph SVG scored through rendered coverage maps
    #[arg(long)]
    glyph: Option<PathBuf>,
    #[arg(long)]
    topk: Option<usize>,
}

#[derive(Args)]
struct MasksArgs {
    layout: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    res: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    glyph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    canvas: Option<usize>,
    #[arg(long)]
    supersample: Option<usize>,
}

#[derive(Args)]
struct EvalFileArgs {
    /// JSON-lines input
    input: PathBuf,
    /// Write the full report as JSON
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-sample scores as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvalDistanceArgs {
    /// Either one JSON-lines file of {"a","b"} SVG path pairs or two SVGs
    #[arg(num_args = 1..=2)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Parse argv and dispatch; the process exit code is 0 on success, 2 for
/// argument or configuration errors, 3 for data errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path as well
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Vectorize(args) => cmd_vectorize(args),
        Command::Morph(args) => cmd_morph(args),
        Command::ScoreSkst(args) => cmd_score_skst(args),
        Command::ScoreGs(args) => cmd_score_gs(args),
        Command::Masks(args) => cmd_masks(args),
        Command::Render(args) => cmd_render(args),
        Command::EvalMiou(args) => cmd_eval_file(args, batch_miou),
        Command::EvalBleu(args) => cmd_eval_file(args, batch_bleu),
        Command::EvalDistance(args) => cmd_eval_distance(args),
    }
}

fn cmd_vectorize(args: VectorizeArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let mut img: GrayImage<f64> = load_pgm(&args.input)?;
    if args.invert || cfg.invert.unwrap_or(false) {
        img = img.map(|v| 1.0 - v);
    }
    let threshold = if args.auto_threshold || cfg.auto_threshold.unwrap_or(false) {
        otsu_threshold(&img)
    } else {
        args.threshold.or(cfg.threshold).unwrap_or(0.5)
    };
    let bitmap = binarize(&img, threshold)?;
    let defaults = OgvParams::default();
    let params = OgvParams {
        stroke_width: args.stroke_width.or(cfg.stroke_width),
        window: args.window.or(cfg.window).unwrap_or(defaults.window),
        spline_tolerance: args
            .tolerance
            .or(cfg.tolerance)
            .unwrap_or(defaults.spline_tolerance),
        resample_spacing: args
            .spacing
            .or(cfg.spacing)
            .unwrap_or(defaults.resample_spacing),
    };
    let glyph = vectorize(&bitmap, &params)?;
    write_text(&args.out, &emit_svg(&glyph))
}

fn cmd_morph(args: MorphArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let glyph: VectorGlyph<f64> = parse_svg(&read_text(&args.glyph)?)?;
    let layout = LayoutAnnotation::from_json(&read_text(&args.layout)?)?;
    let defaults = MorphConfig::default();
    let steps = args.steps.or(cfg.steps).unwrap_or(defaults.steps);
    let gamma_peak = args.gamma_peak.or(cfg.gamma_peak).unwrap_or(100.0);
    let gamma_peak_step = args
        .gamma_peak_step
        .or(cfg.gamma_peak_step)
        .unwrap_or(steps / 2);
    let guidance = match (
        args.guidance_image.or(cfg.guidance_image),
        args.gradient_dir.or(cfg.gradient_dir),
    ) {
        (Some(_), Some(_)) => {
            return Err(Error::argument(
                "guidance_image and gradient_dir are mutually exclusive",
            ))
        }
        (Some(path), None) => GuidanceSpec::TargetImage {
            path,
            weight: args.guidance_weight.or(cfg.guidance_weight).unwrap_or(1.0),
        },
        (None, Some(directory)) => GuidanceSpec::ExternalGradients { directory },
        (None, None) => GuidanceSpec::None,
    };
    let config = MorphConfig {
        steps,
        learning_rate: args
            .learning_rate
            .or(cfg.learning_rate)
            .unwrap_or(defaults.learning_rate),
        w_gs: args.w_gs.or(cfg.w_gs).unwrap_or(defaults.w_gs),
        beta: args.beta.or(cfg.beta).unwrap_or(defaults.beta),
        gamma: GammaSchedule::ramp(gamma_peak_step, gamma_peak),
        topk: args.topk.or(cfg.topk).unwrap_or(defaults.topk),
        guidance,
        map_sigma: args
            .map_sigma
            .or(cfg.map_sigma)
            .unwrap_or(defaults.map_sigma),
        fd_step: args.fd_step.or(cfg.fd_step).unwrap_or(defaults.fd_step),
        fd_subset: args
            .fd_subset
            .or(cfg.fd_subset)
            .unwrap_or(defaults.fd_subset),
        fd_resolution: args
            .fd_resolution
            .or(cfg.fd_resolution)
            .unwrap_or(defaults.fd_resolution),
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };
    let (out, state) = optimize(&glyph, &layout, config)?;
    write_text(&args.out, &emit_svg(&out))?;
    if let Some(trace_path) = &args.trace {
        write_text(trace_path, &trace_csv(&state.trace))?;
    }
    Ok(())
}

fn cmd_score_skst(args: ScoreSkstArgs) -> Result<()> {
    let original: VectorGlyph<f64> = parse_svg(&read_text(&args.original)?)?;
    let deformed: VectorGlyph<f64> = parse_svg(&read_text(&args.deformed)?)?;
    let reference = original.control_points();
    let current = deformed.control_points();
    if reference.len() != current.len() {
        return Err(Error::argument(format!(
            "glyphs have {} vs {} control points",
            reference.len(),
            current.len()
        )));
    }
    let tri = delaunay(&reference)?;
    let anchors = build_anchors(&tri, &original)?;
    let (loss, _) = skst_loss_and_gradient(&anchors, &current, false)?;
    println!("{}", serde_json::json!({ "skst": loss }));
    Ok(())
}

fn cmd_score_gs(args: ScoreGsArgs) -> Result<()> {
    let layout = LayoutAnnotation::from_json(&read_text(&args.layout)?)?;
    let masks = boxes_to_masks(&layout, MAP_RES)?;
    let maps = match (&args.maps, &args.glyph) {
        (Some(path), None) => load_external_maps::<f64>(&read_text(path)?)?,
        (None, Some(path)) => {
            let glyph: VectorGlyph<f64> = parse_svg(&read_text(path)?)?;
            let assignment = assign_components(&glyph, &layout)?;
            let params = RenderParams::default();
            let mut rasters = Vec::new();
            for comp in &layout.components {
                let loops: Vec<_> = assignment
                    .iter()
                    .filter(|&(_, l)| *l == comp.label)
                    .map(|(&li, _)| glyph.loops[li].clone())
                    .collect();
                let img = if loops.is_empty() {
                    GrayImage::new(params.canvas, params.canvas)?
                } else {
                    render(
                        &VectorGlyph {
                            loops,
                            skeletons: vec![],
                            canvas: glyph.canvas,
                        },
                        &params,
                    )?
                };
                rasters.push((comp.label.clone(), img));
            }
            coverage_response_maps(&rasters, MAP_RES)?
        }
        _ => {
            return Err(Error::argument(
                "score-gs needs exactly one of --maps or --glyph",
            ))
        }
    };
    let breakdown = gs_loss(&maps, &masks, &BTreeMap::new(), args.topk.unwrap_or(16))?;
    let components: Vec<_> = breakdown
        .per_component
        .iter()
        .map(|(label, ir, or)| {
            serde_json::json!({ "label": label, "inside": ir, "outside": or })
        })
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "components": components,
            "total": breakdown.total,
        }))
        .expect("breakdown serializes")
    );
    Ok(())
}

fn cmd_masks(args: MasksArgs) -> Result<()> {
    let layout = LayoutAnnotation::from_json(&read_text(&args.layout)?)?;
    let masks = boxes_to_masks(&layout, args.res.unwrap_or(MAP_RES))?;
    let dump: Vec<_> = masks
        .masks
        .iter()
        .map(|m| {
            let rows: Vec<Vec<u8>> = (0..m.res)
                .map(|y| (0..m.res).map(|x| u8::from(m.cells[y * m.res + x])).collect())
                .collect();
            serde_json::json!({ "label": m.label, "rows": rows })
        })
        .collect();
    let text = serde_json::to_string_pretty(&dump).expect("masks serialize");
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let glyph: VectorGlyph<f64> = parse_svg(&read_text(&args.glyph)?)?;
    let defaults = RenderParams::default();
    let params = RenderParams {
        canvas: args.canvas.or(cfg.canvas).unwrap_or(defaults.canvas),
        supersample: args
            .supersample
            .or(cfg.supersample)
            .unwrap_or(defaults.supersample),
    };
    let img = render(&glyph, &params)?;
    save_pgm(&img, &args.out)
}

fn cmd_eval_file(args: EvalFileArgs, run: fn(&str) -> Result<EvalReport>) -> Result<()> {
    let report = run(&read_text(&args.input)?)?;
    emit_report(&report, args.out.as_deref(), args.csv.as_deref())
}

fn emit_report(report: &EvalReport, out: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        write_text(path, &report.to_json())?;
    }
    if let Some(path) = csv {
        write_text(path, &report.to_csv())?;
    }
    if out.is_none() && csv.is_none() {
        println!("{}", report.to_json());
    } else {
        println!("{} mean {:.6}", report.metric, report.mean);
    }
    Ok(())
}

fn cmd_eval_distance(args: EvalDistanceArgs) -> Result<()> {
    let load = |path: &Path| -> Result<VectorGlyph<f64>> { parse_svg(&read_text(path)?) };
    if args.inputs.len() == 2 {
        let d = glyph_distance(&load(&args.inputs[0])?, &load(&args.inputs[1])?)?;
        println!("{}", serde_json::json!({ "distance": d }));
        return Ok(());
    }
    #[derive(Deserialize)]
    struct PairWire {
        a: PathBuf,
        b: PathBuf,
    }
    let mut scores = Vec::new();
    for (ln, line) in read_text(&args.inputs[0])?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let pair: PairWire = serde_json::from_str(line)
            .map_err(|e| Error::argument(format!("line {}: {e}", ln + 1)))?;
        scores.push(glyph_distance(&load(&pair.a)?, &load(&pair.b)?)?);
    }
    if scores.is_empty() {
        return Err(Error::argument("no glyph pairs in input"));
    }
    let report = EvalReport::new("distance", scores, 0);
    emit_report(&report, args.out.as_deref(), args.csv.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"stepz": 4}"#).unwrap();
        let err = load_config(Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_defaults_when_absent() {
        let cfg = load_config(None).unwrap();
        assert!(cfg.steps.is_none());
        assert!(cfg.seed.is_none());
    }

    #[test]
    fn masks_command_writes_dump() {
        let dir = tempfile::tempdir().unwrap();
        let layout = dir.path().join("l.json");
        let mut f = std::fs::File::create(&layout).unwrap();
        write!(
            f,
            r#"{{"id":"x","concept":"c","components":[{{"label":"a","box":[0.0,0.0,1.0,1.0]}}]}}"#
        )
        .unwrap();
        let out = dir.path().join("m.json");
        let code = run([
            "oraclevec",
            "masks",
            layout.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("\"label\": \"a\""));
    }

    #[test]
    fn bad_arguments_exit_two() {
        assert_eq!(run(["oraclevec", "no-such-command"]), 2);
        assert_eq!(run(["oraclevec", "vectorize"]), 2);
    }

    #[test]
    fn missing_input_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.svg");
        let code = run([
            "oraclevec",
            "vectorize",
            "/nonexistent/input.pgm",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 3);
    }
}
