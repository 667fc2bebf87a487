//! Glyph structural constraint: layout masks, cross-attention response
//! maps, Gaussian map smoothing and the Top-k inside/outside-region losses.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::layout::LayoutAnnotation;
use crate::num::Real;
use crate::raster::{downsample_mean, gaussian_blur, GrayImage};

pub const MAP_RES: usize = 16;

/// Binary spatial mask over the response-map grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub label: String,
    pub res: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            label: self.label.clone(),
            res: self.res,
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub masks: Vec<Mask>,
}

impl MaskSet {
    pub fn by_label(&self, label: &str) -> Option<&Mask> {
        self.masks.iter().find(|m| m.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapSource {
    Attention,
    Coverage,
    External,
}

/// Nonnegative spatial response map on a res x res grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap<F> {
    pub res: usize,
    pub values: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMaps<F> {
    pub source: MapSource,
    pub maps: Vec<ResponseMap<F>>,
    /// Component labels when maps are keyed by label (coverage/external).
    pub labels: Option<Vec<String>>,
}

impl<F: Real> ResponseMaps<F> {
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.maps.iter().enumerate() {
            if m.values.len() != m.res * m.res {
                return Err(Error::argument(format!("map {i} has wrong cell count")));
            }
            if m.values.iter().any(|v| !v.is_finite() || *v < F::zero()) {
                return Err(Error::argument(format!(
                    "map {i} contains negative or non-finite values"
                )));
            }
        }
        Ok(())
    }

    /// Token index for a component label: by label list when present,
    /// otherwise from the supplied mapping.
    pub fn token_for(
        &self,
        label: &str,
        component_tokens: &BTreeMap<String, usize>,
    ) -> Result<usize> {
        if let Some(labels) = &self.labels {
            return labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::Config(format!("no response map for label {label:?}")));
        }
        component_tokens
            .get(label)
            .copied()
            .ok_or_else(|| Error::Config(format!("component {label:?} has no token mapping")))
    }
}

/// Pre-projected attention inputs: token key rows and spatial query rows.
#[derive(Debug, Clone)]
pub struct AttentionInputs<F> {
    /// N rows of dimension d.
    pub token_vectors: Vec<Vec<F>>,
    /// One row of dimension d per spatial location (res*res rows).
    pub feature_vectors: Vec<Vec<F>>,
    pub dim: usize,
}

/// Rasterize layout boxes onto the response grid: a cell is set when its
/// center lies inside the box.
pub fn boxes_to_masks(layout: &LayoutAnnotation, res: usize) -> Result<MaskSet> {
    layout.validate()?;
    if res < 1 {
        return Err(Error::argument("mask resolution must be >= 1"));
    }
    let mut masks = Vec::with_capacity(layout.components.len());
    for c in &layout.components {
        let mut cells = vec![false; res * res];
        let mut any = false;
        for v in 0..res {
            for u in 0..res {
                let cx = (u as f64 + 0.5) / res as f64;
                let cy = (v as f64 + 0.5) / res as f64;
                if c.box_.contains(cx, cy) {
                    cells[v * res + u] = true;
                    any = true;
                }
            }
        }
        if !any {
            return Err(Error::Degenerate(format!(
                "box for component {:?} covers no cell center at resolution {res}",
                c.label
            )));
        }
        masks.push(Mask {
            label: c.label.clone(),
            res,
            cells,
        });
    }
    Ok(MaskSet { masks })
}

/// Per-location softmax over tokens of q.k / sqrt(d), reshaped to one map
/// per token. With `exclude_sot` the first token is dropped before the
/// softmax and receives no map.
pub fn cross_attention<F: Real>(
    inputs: &AttentionInputs<F>,
    exclude_sot: bool,
) -> Result<ResponseMaps<F>> {
    if inputs.dim == 0 {
        return Err(Error::argument("attention dimension must be > 0"));
    }
    let n_tokens = inputs.token_vectors.len();
    if n_tokens == 0 || (exclude_sot && n_tokens < 2) {
        return Err(Error::argument("not enough tokens"));
    }
    let locations = inputs.feature_vectors.len();
    let res = (locations as f64).sqrt().round() as usize;
    if res * res != locations {
        return Err(Error::argument(format!(
            "feature row count {locations} is not a square grid"
        )));
    }
    for (i, t) in inputs.token_vectors.iter().enumerate() {
        if t.len() != inputs.dim {
            return Err(Error::argument(format!("token {i} has wrong dimension")));
        }
    }
    for (i, f) in inputs.feature_vectors.iter().enumerate() {
        if f.len() != inputs.dim {
            return Err(Error::argument(format!("feature row {i} has wrong dimension")));
        }
    }
    let first = if exclude_sot { 1 } else { 0 };
    let kept = n_tokens - first;
    let scale = F::one() / F::from_usize_c(inputs.dim).sqrt();
    let mut maps = vec![
        ResponseMap {
            res,
            values: vec![F::zero(); locations],
        };
        kept
    ];
    for (loc, q) in inputs.feature_vectors.iter().enumerate() {
        let logits: Vec<F> = inputs.token_vectors[first..]
            .iter()
            .map(|k| {
                let dot: F = q.iter().zip(k).map(|(&a, &b)| a * b).sum();
                dot * scale
            })
            .collect();
        let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = logits.iter().map(|&l| (l - max).exp()).collect();
        let denom: F = exps.iter().copied().sum();
        for (j, &e) in exps.iter().enumerate() {
            maps[j].values[loc] = e / denom;
        }
    }
    Ok(ResponseMaps {
        source: MapSource::Attention,
        maps,
        labels: None,
    })
}

/// Gaussian smoothing of every map on its own grid.
pub fn smooth_maps<F: Real>(maps: &ResponseMaps<F>, sigma: F) -> Result<ResponseMaps<F>> {
    let mut out = maps.clone();
    for m in &mut out.maps {
        let img = GrayImage::from_values(m.res, m.res, m.values.clone())?;
        m.values = gaussian_blur(&img, sigma)?.values;
    }
    Ok(out)
}

/// Mean of the P largest entries of the elementwise product map * mask.
/// Ties break toward the lower flat index.
pub fn topk_mean<F: Real>(map: &ResponseMap<F>, mask: &Mask, p: usize) -> Result<F> {
    if map.res != mask.res {
        return Err(Error::argument("map and mask resolution mismatch"));
    }
    let n = map.res * map.res;
    if p < 1 || p > n {
        return Err(Error::argument(format!("top-k count must be in 1..={n}, got {p}")));
    }
    let mut product: Vec<(F, usize)> = map
        .values
        .iter()
        .zip(&mask.cells)
        .enumerate()
        .map(|(i, (&v, &m))| (if m { v } else { F::zero() }, i))
        .collect();
    product.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let sum: F = product.iter().take(p).map(|&(v, _)| v).sum();
    Ok(sum / F::from_usize_c(p))
}

/// Inside/outside-region losses for one component: high response is pulled
/// inside the mask and suppressed outside. Values above 1 (coverage maps)
/// are clamped to 1.
pub fn region_losses<F: Real>(
    map: &ResponseMap<F>,
    mask: &Mask,
    p: usize,
) -> Result<(F, F)> {
    let clamped = ResponseMap {
        res: map.res,
        values: map.values.iter().map(|&v| v.min(F::one())).collect(),
    };
    let inside = F::one() - topk_mean(&clamped, mask, p)?;
    let outside = topk_mean(&clamped, &mask.complement(), p)?;
    Ok((inside, outside))
}

/// Per-component breakdown of the structural loss.
#[derive(Debug, Clone)]
pub struct GsBreakdown<F> {
    pub per_component: Vec<(String, F, F)>,
    pub total: F,
}

/// Sum of inside- and outside-region losses over every component.
pub fn gs_loss<F: Real>(
    maps: &ResponseMaps<F>,
    masks: &MaskSet,
    component_tokens: &BTreeMap<String, usize>,
    p: usize,
) -> Result<GsBreakdown<F>> {
    let mut per_component = Vec::with_capacity(masks.masks.len());
    let mut total = F::zero();
    for mask in &masks.masks {
        let token = maps.token_for(&mask.label, component_tokens)?;
        let map = maps
            .maps
            .get(token)
            .ok_or_else(|| Error::Config(format!("token index {token} out of range")))?;
        let (ir, or) = region_losses(map, mask, p)?;
        total += ir + or;
        per_component.push((mask.label.clone(), ir, or));
    }
    Ok(GsBreakdown { per_component, total })
}

/// Build coverage-sourced response maps by block-averaging per-component
/// rendered rasters down to the constraint grid.
pub fn coverage_response_maps<F: Real>(
    component_rasters: &[(String, GrayImage<F>)],
    res: usize,
) -> Result<ResponseMaps<F>> {
    let dims = component_rasters
        .first()
        .map(|(_, img)| (img.width, img.height));
    let mut maps = Vec::with_capacity(component_rasters.len());
    let mut labels = Vec::with_capacity(component_rasters.len());
    for (label, img) in component_rasters {
        if Some((img.width, img.height)) != dims {
            return Err(Error::argument("component rasters differ in dimensions"));
        }
        let small = downsample_mean(img, res)?;
        maps.push(ResponseMap {
            res,
            values: small.values,
        });
        labels.push(label.clone());
    }
    Ok(ResponseMaps {
        source: MapSource::Coverage,
        maps,
        labels: Some(labels),
    })
}

/// Load external response maps from JSON keyed by label, each a res x res
/// array of rows.
pub fn load_external_maps<F: Real>(text: &str) -> Result<ResponseMaps<F>> {
    let parsed: BTreeMap<String, Vec<Vec<f64>>> = serde_json::from_str(text)
        .map_err(|e| Error::argument(format!("external maps json: {e}")))?;
    let mut maps = Vec::new();
    let mut labels = Vec::new();
    for (label, rows) in parsed {
        let res = rows.len();
        let mut values = Vec::with_capacity(res * res);
        for row in &rows {
            if row.len() != res {
                return Err(Error::argument(format!(
                    "map {label:?} is not square: row of {} in a {res}-row map",
                    row.len()
                )));
            }
            values.extend(row.iter().map(|&v| F::c(v)));
        }
        maps.push(ResponseMap { res, values });
        labels.push(label);
    }
    let out = ResponseMaps {
        source: MapSource::External,
        maps,
        labels: Some(labels),
    };
    out.validate()?;
    Ok(out)
}
