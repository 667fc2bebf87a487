//! Structure-constrained vector morphing: moment-adaptive descent over
//! control points with analytic skeleton-structure gradients and seeded
//! finite differences for the raster terms.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::{
    boxes_to_masks, coverage_response_maps, gs_loss, smooth_maps, MaskSet, MAP_RES,
};
use crate::delaunay::delaunay;
use crate::error::{Error, Result};
use crate::layout::LayoutAnnotation;
use crate::maintain::{build_anchors, skst_loss_and_gradient, SkeletonAnchors};
use crate::num::{Point2, Real};
use crate::ogv::VectorGlyph;
use crate::raster::{downsample_mean, gaussian_blur, load_pgm, GrayImage};
use crate::render::{render, RenderParams};

/// Blur width for the tone term at a 256-pixel canvas; scaled linearly with
/// the working resolution.
pub const TONE_SIGMA_AT_256: f64 = 8.0;

/// Piecewise-linear schedule over step indices, constant beyond the ends.
#[derive(Debug, Clone)]
pub struct GammaSchedule {
    pub knots: Vec<(usize, f64)>,
}

impl GammaSchedule {
    pub fn constant(value: f64) -> Self {
        Self { knots: vec![(0, value)] }
    }

    /// Linear ramp from 0 at step 0 to `peak` at `peak_step`, constant after.
    pub fn ramp(peak_step: usize, peak: f64) -> Self {
        if peak_step == 0 {
            return Self::constant(peak);
        }
        Self {
            knots: vec![(0, 0.0), (peak_step, peak)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::argument("gamma schedule has no knots"));
        }
        for w in self.knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::argument("gamma schedule steps must increase"));
            }
        }
        if self.knots.iter().any(|&(_, v)| v < 0.0 || !v.is_finite()) {
            return Err(Error::argument("gamma values must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn value_at(&self, step: usize) -> f64 {
        let first = self.knots[0];
        if step <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            let (s0, v0) = w[0];
            let (s1, v1) = w[1];
            if step <= s1 {
                let t = (step - s0) as f64 / (s1 - s0) as f64;
                return v0 + t * (v1 - v0);
            }
        }
        self.knots.last().unwrap().1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum GuidanceSpec {
    #[default]
    None,
    /// Pull the low-resolution render toward a grayscale target image.
    TargetImage { path: PathBuf, weight: f64 },
    /// Per-step gradient sidecars "grad_{step}.json" with one 2-vector per
    /// control point.
    ExternalGradients { directory: PathBuf },
}

impl GuidanceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GuidanceSpec::None => Ok(()),
            GuidanceSpec::TargetImage { path, weight } => {
                if !weight.is_finite() || *weight < 0.0 {
                    return Err(Error::argument("guidance weight must be finite and >= 0"));
                }
                if !path.is_file() {
                    return Err(Error::Guidance(format!(
                        "target image {} does not exist",
                        path.display()
                    )));
                }
                Ok(())
            }
            GuidanceSpec::ExternalGradients { directory } => {
                if !directory.is_dir() {
                    return Err(Error::Guidance(format!(
                        "gradient directory {} does not exist",
                        directory.display()
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MorphConfig {
    pub steps: usize,
    /// Descent step size in canvas pixels.
    pub learning_rate: f64,
    /// Weight of the region-structure term.
    pub w_gs: f64,
    /// Weight of the skeleton-structure term.
    pub beta: f64,
    /// Step-dependent weight of the tone term.
    pub gamma: GammaSchedule,
    /// Top-k pool size for the region losses.
    pub topk: usize,
    pub guidance: GuidanceSpec,
    /// Central-difference half step, in working-resolution pixels. Probes
    /// are scaled up to canvas units so they stay resolvable on the
    /// supersample grid of the low-resolution renders.
    pub fd_step: f64,
    /// Gaussian width (in constraint-grid cells) applied to the coverage
    /// response maps; spreads the region losses so components feel their
    /// target boxes before overlapping them.
    pub map_sigma: f64,
    /// Contour points probed per step.
    pub fd_subset: usize,
    /// Working canvas side for finite-difference renders.
    pub fd_resolution: usize,
    pub seed: u64,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            steps: 800,
            learning_rate: 0.5,
            w_gs: 1.0,
            beta: 0.5,
            gamma: GammaSchedule::ramp(400, 100.0),
            topk: 16,
            guidance: GuidanceSpec::None,
            map_sigma: 2.0,
            fd_step: 0.5,
            fd_subset: 32,
            fd_resolution: 64,
            seed: 0,
        }
    }
}

impl MorphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::argument("learning rate must be > 0"));
        }
        if self.beta < 0.0 || self.w_gs < 0.0 {
            return Err(Error::argument("loss weights must be >= 0"));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::argument("fd_step must be > 0"));
        }
        if !(self.map_sigma.is_finite() && self.map_sigma >= 0.0) {
            return Err(Error::argument("map_sigma must be finite and >= 0"));
        }
        if self.fd_subset == 0 {
            return Err(Error::argument("fd_subset must be >= 1"));
        }
        if self.fd_resolution < 8 {
            return Err(Error::argument("fd_resolution must be >= 8"));
        }
        if self.topk == 0 {
            return Err(Error::argument("topk must be >= 1"));
        }
        self.gamma.validate()?;
        self.guidance.validate()
    }
}

/// One trace row per completed step.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow<F> {
    pub step: usize,
    pub guidance: F,
    pub gs: F,
    pub skst: F,
    pub tone: F,
    pub total: F,
}

#[derive(Debug, Clone)]
pub struct MorphState<F> {
    pub positions: Vec<Point2<F>>,
    pub step: usize,
    pub trace: Vec<TraceRow<F>>,
}

pub fn trace_csv<F: Real>(trace: &[TraceRow<F>]) -> String {
    let mut out = String::from("step,guidance,gs,skst,tone,total\n");
    for row in trace {
        out.push_str(&format!(
            "{},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
            row.step,
            row.guidance.as_f64(),
            row.gs.as_f64(),
            row.skst.as_f64(),
            row.tone.as_f64(),
            row.total.as_f64()
        ));
    }
    out
}

/// Frozen per-run context: reference anchors, layout masks, the original
/// blurred raster and any guidance target.
pub struct MorphContext<F: Real> {
    pub template: VectorGlyph<F>,
    pub layout: LayoutAnnotation,
    pub anchors: SkeletonAnchors<F>,
    pub masks: MaskSet,
    pub assignment: BTreeMap<usize, String>,
    pub original_blurred: GrayImage<F>,
    pub tone_sigma: F,
    pub target: Option<(GrayImage<F>, F)>,
    pub config: MorphConfig,
}

fn fd_render_params(config: &MorphConfig) -> RenderParams {
    RenderParams {
        canvas: config.fd_resolution,
        supersample: 4,
    }
}

/// Assign every loop to the layout label whose box overlaps most of the
/// loop's coverage; ties take the earlier component, zero overlap falls back
/// to the nearest box center.
pub fn assign_components<F: Real>(
    glyph: &VectorGlyph<F>,
    layout: &LayoutAnnotation,
) -> Result<BTreeMap<usize, String>> {
    layout.validate()?;
    if glyph.loops.is_empty() {
        return Err(Error::argument("glyph has no loops to assign"));
    }
    let res = 64usize;
    let params = RenderParams {
        canvas: res,
        supersample: 2,
    };
    let mut assignment = BTreeMap::new();
    for li in 0..glyph.loops.len() {
        let single = VectorGlyph {
            loops: vec![glyph.loops[li].clone()],
            skeletons: vec![],
            canvas: glyph.canvas,
        };
        let img = render(&single, &params)?;
        let mut best: Option<(usize, f64)> = None;
        for (ci, comp) in layout.components.iter().enumerate() {
            let mut overlap = 0.0;
            for y in 0..res {
                for x in 0..res {
                    let u = (x as f64 + 0.5) / res as f64;
                    let v = (y as f64 + 0.5) / res as f64;
                    if comp.box_.contains(u, v) {
                        overlap += img.get(x, y).as_f64();
                    }
                }
            }
            let better = match best {
                None => true,
                Some((_, b)) => overlap > b,
            };
            if better {
                best = Some((ci, overlap));
            }
        }
        let (mut ci, overlap) = best.expect("layout has components");
        if overlap == 0.0 {
            // centroid of the flattened outline against box centers
            let poly = glyph.loops[li].flatten(F::c(0.25));
            let n = F::from_usize_c(poly.len().max(1));
            let mut c = Point2::new(F::zero(), F::zero());
            for p in &poly {
                c += *p;
            }
            let c = (c / n).to_f64();
            let cx = c.x / glyph.canvas.0 as f64;
            let cy = c.y / glyph.canvas.1 as f64;
            let mut best_d = f64::INFINITY;
            for (i, comp) in layout.components.iter().enumerate() {
                let (bx, by) = comp.box_.center();
                let d = (bx - cx).powi(2) + (by - cy).powi(2);
                if d < best_d {
                    best_d = d;
                    ci = i;
                }
            }
        }
        assignment.insert(li, layout.components[ci].label.clone());
    }
    Ok(assignment)
}

impl<F: Real> MorphContext<F> {
    pub fn new(
        glyph: &VectorGlyph<F>,
        layout: &LayoutAnnotation,
        config: MorphConfig,
    ) -> Result<Self> {
        config.validate()?;
        layout.validate()?;
        if glyph.is_empty() {
            return Err(Error::argument("cannot morph an empty glyph"));
        }
        let points = glyph.control_points();
        let tri = delaunay(&points)?;
        let anchors = build_anchors(&tri, glyph)?;
        let masks = boxes_to_masks(layout, MAP_RES)?;
        let assignment = assign_components(glyph, layout)?;
        let params = fd_render_params(&config);
        let tone_sigma = F::c(TONE_SIGMA_AT_256 * config.fd_resolution as f64 / 256.0);
        let original_blurred = gaussian_blur(&render(glyph, &params)?, tone_sigma)?;
        let target = match &config.guidance {
            GuidanceSpec::TargetImage { path, weight } => {
                let img: GrayImage<F> = load_pgm(path)?;
                let img = if img.width == config.fd_resolution && img.height == config.fd_resolution
                {
                    img
                } else {
                    downsample_mean(&img, config.fd_resolution)?
                };
                Some((img, F::c(*weight)))
            }
            _ => None,
        };
        Ok(Self {
            template: glyph.clone(),
            layout: layout.clone(),
            anchors,
            masks,
            assignment,
            original_blurred,
            tone_sigma,
            target,
            config,
        })
    }

    fn glyph_at(&self, positions: &[Point2<F>]) -> Result<VectorGlyph<F>> {
        self.template.with_control_points(positions)
    }

    /// Guidance, region-structure and tone terms from a single low-resolution
    /// render pass. These are the finite-differenced terms.
    fn raster_terms(&self, positions: &[Point2<F>]) -> Result<(F, F, F)> {
        let glyph = self.glyph_at(positions)?;
        let params = fd_render_params(&self.config);
        let full = render(&glyph, &params)?;

        let guidance = match &self.target {
            Some((img, weight)) => {
                let n = F::from_usize_c(full.values.len());
                let sum: F = full
                    .values
                    .iter()
                    .zip(&img.values)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                *weight * sum / n
            }
            None => F::zero(),
        };

        // per-label coverage maps; labels with no loops keep a zero raster
        let mut rasters: Vec<(String, GrayImage<F>)> = Vec::new();
        for comp in &self.layout.components {
            let keep: Vec<_> = self
                .assignment
                .iter()
                .filter(|&(_, l)| *l == comp.label)
                .map(|(&li, _)| glyph.loops[li].clone())
                .collect();
            let img = if keep.is_empty() {
                GrayImage::new(params.canvas, params.canvas)?
            } else {
                render(
                    &VectorGlyph {
                        loops: keep,
                        skeletons: vec![],
                        canvas: glyph.canvas,
                    },
                    &params,
                )?
            };
            rasters.push((comp.label.clone(), img));
        }
        let maps = coverage_response_maps(&rasters, MAP_RES)?;
        let mut maps = if self.config.map_sigma > 0.0 {
            smooth_maps(&maps, F::c(self.config.map_sigma))?
        } else {
            maps
        };
        // max-normalize each map so the region losses reward moving ink
        // rather than deleting it, mirroring normalized attention responses
        for map in &mut maps.maps {
            let peak = map.values.iter().fold(F::zero(), |a, &v| a.max(v));
            if peak > F::zero() {
                for v in &mut map.values {
                    *v /= peak;
                }
            }
        }
        let gs = gs_loss(&maps, &self.masks, &BTreeMap::new(), self.config.topk)?.total;

        let blurred = gaussian_blur(&full, self.tone_sigma)?;
        let n = F::from_usize_c(blurred.values.len());
        let tone: F = blurred
            .values
            .iter()
            .zip(&self.original_blurred.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<F>()
            / n;

        Ok((guidance, gs, tone))
    }
}

/// Total objective and per-term breakdown at the given step.
pub fn total_loss<F: Real>(
    ctx: &MorphContext<F>,
    positions: &[Point2<F>],
    step: usize,
) -> Result<TraceRow<F>> {
    let (guidance, gs, tone) = ctx.raster_terms(positions)?;
    let (skst, _) = skst_loss_and_gradient(&ctx.anchors, positions, false)?;
    let w = F::c(ctx.config.w_gs);
    let beta = F::c(ctx.config.beta);
    let gamma = F::c(ctx.config.gamma.value_at(step));
    Ok(TraceRow {
        step,
        guidance,
        gs,
        skst,
        tone,
        total: guidance + w * gs + beta * skst + gamma * tone,
    })
}

/// Probe distance in canvas units for the configured working resolution.
pub fn fd_step_canvas<F: Real>(ctx: &MorphContext<F>) -> f64 {
    let canvas = ctx.template.canvas.0.max(ctx.template.canvas.1) as f64;
    ctx.config.fd_step * canvas / ctx.config.fd_resolution as f64
}

fn fd_subset_indices(config: &MorphConfig, step: usize, contour_count: usize) -> Vec<usize> {
    if config.fd_subset >= contour_count {
        return (0..contour_count).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(
        config
            .seed
            .wrapping_add((step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let mut idx = rand::seq::index::sample(&mut rng, contour_count, config.fd_subset).into_vec();
    idx.sort_unstable();
    idx
}

/// Gradient of the objective: analytic skeleton-structure part on every
/// anchored point plus central finite differences of the raster terms on a
/// seeded subset of contour points. External guidance vectors add directly.
pub fn gradient<F: Real>(
    ctx: &MorphContext<F>,
    positions: &[Point2<F>],
    step: usize,
) -> Result<Vec<Point2<F>>> {
    let beta = F::c(ctx.config.beta);
    let w = F::c(ctx.config.w_gs);
    let gamma = F::c(ctx.config.gamma.value_at(step));
    let mut grad = vec![Point2::new(F::zero(), F::zero()); positions.len()];

    let (_, skst_grad) = skst_loss_and_gradient(&ctx.anchors, positions, true)?;
    if let Some(g) = skst_grad {
        for (gi, s) in grad.iter_mut().zip(g) {
            *gi += s * beta;
        }
    }

    let raster_scalar = |p: &[Point2<F>]| -> Result<F> {
        let (guidance, gs, tone) = ctx.raster_terms(p)?;
        Ok(guidance + w * gs + gamma * tone)
    };
    let raster_active = ctx.config.w_gs > 0.0
        || ctx.config.gamma.value_at(step) > 0.0
        || ctx.target.is_some();
    if raster_active {
        let h = F::c(fd_step_canvas(ctx));
        let two_h = h + h;
        let contour_count = ctx.template.contour_point_count();
        let mut probe = positions.to_vec();
        for i in fd_subset_indices(&ctx.config, step, contour_count) {
            for axis in 0..2 {
                let base = probe[i];
                let delta = if axis == 0 {
                    Point2::new(h, F::zero())
                } else {
                    Point2::new(F::zero(), h)
                };
                probe[i] = base + delta;
                let plus = raster_scalar(&probe)?;
                probe[i] = base - delta;
                let minus = raster_scalar(&probe)?;
                probe[i] = base;
                let d = (plus - minus) / two_h;
                if axis == 0 {
                    grad[i].x += d;
                } else {
                    grad[i].y += d;
                }
            }
        }
    }

    if let GuidanceSpec::ExternalGradients { directory } = &ctx.config.guidance {
        let ext = load_external_gradients::<F>(directory, step, positions.len())?;
        for (gi, e) in grad.iter_mut().zip(ext) {
            *gi += e;
        }
    }

    for (i, g) in grad.iter().enumerate() {
        if !(g.x.as_f64().is_finite() && g.y.as_f64().is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient at point {i}"
            )));
        }
    }
    Ok(grad)
}

/// Per-step guidance sidecar: "grad_{step}.json" holding one [dx, dy] per
/// control point.
pub fn load_external_gradients<F: Real>(
    directory: &Path,
    step: usize,
    expected: usize,
) -> Result<Vec<Point2<F>>> {
    let path = directory.join(format!("grad_{step}.json"));
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::Guidance(format!("missing gradient file {}", path.display())))?;
    let rows: Vec<[f64; 2]> = serde_json::from_str(&text)
        .map_err(|e| Error::Guidance(format!("{}: {e}", path.display())))?;
    if rows.len() != expected {
        return Err(Error::Guidance(format!(
            "{} has {} vectors, expected {expected}",
            path.display(),
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if !(r[0].is_finite() && r[1].is_finite()) {
            return Err(Error::Guidance(format!(
                "{} has a non-finite vector at index {i}",
                path.display()
            )));
        }
    }
    Ok(rows
        .into_iter()
        .map(|r| Point2::new(F::c(r[0]), F::c(r[1])))
        .collect())
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Run the optimization loop and return the morphed glyph with its loss
/// trace. Deterministic given the config seed.
pub fn optimize<F: Real>(
    glyph: &VectorGlyph<F>,
    layout: &LayoutAnnotation,
    config: MorphConfig,
) -> Result<(VectorGlyph<F>, MorphState<F>)> {
    let ctx = MorphContext::new(glyph, layout, config)?;
    let mut state = MorphState {
        positions: glyph.control_points(),
        step: 0,
        trace: Vec::with_capacity(ctx.config.steps),
    };
    let n = state.positions.len();
    let mut m = vec![Point2::new(F::zero(), F::zero()); n];
    let mut v = vec![Point2::new(F::zero(), F::zero()); n];
    let b1 = F::c(ADAM_BETA1);
    let b2 = F::c(ADAM_BETA2);
    let eps = F::c(ADAM_EPS);
    let lr = F::c(ctx.config.learning_rate);
    let bound_lo = -(glyph.canvas.0.max(glyph.canvas.1) as f64);
    let bound_hi = 2.0 * glyph.canvas.0.max(glyph.canvas.1) as f64;

    for t in 0..ctx.config.steps {
        let row = total_loss(&ctx, &state.positions, t)?;
        let grad = gradient(&ctx, &state.positions, t)?;
        let bias1 = F::one() - b1.powi(t as i32 + 1);
        let bias2 = F::one() - b2.powi(t as i32 + 1);
        for i in 0..n {
            let g = grad[i];
            m[i] = m[i] * b1 + g * (F::one() - b1);
            v[i].x = b2 * v[i].x + (F::one() - b2) * g.x * g.x;
            v[i].y = b2 * v[i].y + (F::one() - b2) * g.y * g.y;
            let mx = m[i].x / bias1;
            let my = m[i].y / bias1;
            let vx = (v[i].x / bias2).sqrt() + eps;
            let vy = (v[i].y / bias2).sqrt() + eps;
            state.positions[i].x -= lr * mx / vx;
            state.positions[i].y -= lr * my / vy;
            let (px, py) = (state.positions[i].x.as_f64(), state.positions[i].y.as_f64());
            if !(bound_lo..=bound_hi).contains(&px) || !(bound_lo..=bound_hi).contains(&py) {
                return Err(Error::Numeric(format!(
                    "point {i} diverged to ({px:.2}, {py:.2}) at step {t}"
                )));
            }
        }
        state.trace.push(row);
        state.step = t + 1;
    }
    let out = ctx.template.with_control_points(&state.positions)?;
    Ok((out, state))
}
