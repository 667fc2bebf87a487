//! SVG 1.1 subset writer/reader for vector glyphs.
//!
//! Drawing group "glyph" holds one path per loop (absolute M/C/Z, black
//! fill); group "skeleton" carries the skeleton polylines as inert
//! metadata. The parser accepts absolute M/C/L/Z only.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::num::{Point2, Real};
use crate::ogv::{GlyphLoop, VectorGlyph};
use crate::spline::CubicSegment;

fn fmt_coord<F: Real>(v: F) -> String {
    format!("{:.4}", v.as_f64())
}

/// Serialize a glyph. Deterministic: identical glyphs produce identical text.
pub fn emit_svg<F: Real>(glyph: &VectorGlyph<F>) -> String {
    let (w, h) = glyph.canvas;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(out, "  <g id=\"glyph\">").unwrap();
    for l in &glyph.loops {
        let mut d = String::new();
        if let Some(first) = l.segments.first() {
            write!(d, "M {} {}", fmt_coord(first.p0.x), fmt_coord(first.p0.y)).unwrap();
            for seg in &l.segments {
                write!(
                    d,
                    " C {} {} {} {} {} {}",
                    fmt_coord(seg.p1.x),
                    fmt_coord(seg.p1.y),
                    fmt_coord(seg.p2.x),
                    fmt_coord(seg.p2.y),
                    fmt_coord(seg.p3.x),
                    fmt_coord(seg.p3.y)
                )
                .unwrap();
            }
            d.push_str(" Z");
        }
        writeln!(out, "    <path d=\"{d}\" fill=\"#000000\"/>").unwrap();
    }
    writeln!(out, "  </g>").unwrap();
    writeln!(out, "  <g id=\"skeleton\" fill=\"none\" stroke=\"none\" display=\"none\">").unwrap();
    for s in &glyph.skeletons {
        let pts: Vec<String> = s
            .iter()
            .map(|p| format!("{},{}", fmt_coord(p.x), fmt_coord(p.y)))
            .collect();
        writeln!(out, "    <polyline points=\"{}\"/>", pts.join(" ")).unwrap();
    }
    writeln!(out, "  </g>").unwrap();
    out.push_str("</svg>\n");
    out
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let needle = format!("{name}=\"");
    let start = tag.find(&needle)? + needle.len();
    let end = tag[start..].find('"')? + start;
    Some(&tag[start..end])
}

fn parse_number<F: Real>(tok: &str, index: usize) -> Result<F> {
    tok.parse::<f64>()
        .map(F::c)
        .map_err(|_| Error::SvgParse {
            index,
            message: format!("invalid number {tok:?}"),
        })
}

fn parse_path_data<F: Real>(d: &str) -> Result<GlyphLoop<F>> {
    let tokens: Vec<&str> = d
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    let mut segments: Vec<CubicSegment<F>> = Vec::new();
    let mut start: Option<Point2<F>> = None;
    let mut current = Point2::<F>::zero();
    let mut closed = false;
    let mut i = 0usize;
    let mut cmd_index = 0usize;
    while i < tokens.len() {
        let cmd = tokens[i];
        i += 1;
        match cmd {
            "M" => {
                if start.is_some() {
                    return Err(Error::SvgParse {
                        index: cmd_index,
                        message: "multiple subpaths per path element are not supported".into(),
                    });
                }
                let x = parse_number::<F>(tokens.get(i).copied().unwrap_or(""), cmd_index)?;
                let y = parse_number::<F>(tokens.get(i + 1).copied().unwrap_or(""), cmd_index)?;
                i += 2;
                current = Point2::new(x, y);
                start = Some(current);
            }
            "L" => {
                let x = parse_number::<F>(tokens.get(i).copied().unwrap_or(""), cmd_index)?;
                let y = parse_number::<F>(tokens.get(i + 1).copied().unwrap_or(""), cmd_index)?;
                i += 2;
                let to = Point2::new(x, y);
                segments.push(CubicSegment::line(current, to));
                current = to;
            }
            "C" => {
                let mut xs = [F::zero(); 6];
                for v in xs.iter_mut() {
                    *v = parse_number::<F>(tokens.get(i).copied().unwrap_or(""), cmd_index)?;
                    i += 1;
                }
                let seg = CubicSegment::new(
                    current,
                    Point2::new(xs[0], xs[1]),
                    Point2::new(xs[2], xs[3]),
                    Point2::new(xs[4], xs[5]),
                );
                current = seg.p3;
                segments.push(seg);
            }
            "Z" | "z" => {
                let s = start.ok_or(Error::SvgParse {
                    index: cmd_index,
                    message: "Z before M".into(),
                })?;
                if current.dist(s) > F::c(1e-9) {
                    segments.push(CubicSegment::line(current, s));
                    current = s;
                }
                closed = true;
            }
            other => {
                return Err(Error::SvgParse {
                    index: cmd_index,
                    message: format!("unsupported path command {other:?}"),
                });
            }
        }
        cmd_index += 1;
    }
    if !closed {
        return Err(Error::SvgParse {
            index: cmd_index,
            message: "open path: missing Z".into(),
        });
    }
    Ok(GlyphLoop { segments })
}

fn parse_polyline_points<F: Real>(points: &str) -> Result<Vec<Point2<F>>> {
    let nums: Vec<&str> = points
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    if nums.len() % 2 != 0 {
        return Err(Error::SvgParse {
            index: 0,
            message: "odd coordinate count in polyline".into(),
        });
    }
    nums.chunks(2)
        .map(|c| {
            Ok(Point2::new(
                parse_number::<F>(c[0], 0)?,
                parse_number::<F>(c[1], 0)?,
            ))
        })
        .collect()
}

/// Parse a document produced by [`emit_svg`] (or an equivalent restricted
/// subset: absolute M/C/L/Z, one subpath per path element).
pub fn parse_svg<F: Real>(text: &str) -> Result<VectorGlyph<F>> {
    let mut canvas = (256usize, 256usize);
    let mut loops = Vec::new();
    let mut skeletons = Vec::new();
    let mut group_stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let Some(close) = rest[open..].find('>') else { break };
        let tag = &rest[open + 1..open + close];
        rest = &rest[open + close + 1..];
        let tag_trim = tag.trim();
        if let Some(stripped) = tag_trim.strip_prefix("svg") {
            if let Some(vb) = attr(stripped, "viewBox") {
                let parts: Vec<&str> = vb.split_whitespace().collect();
                if parts.len() == 4 {
                    let w: f64 = parts[2].parse().unwrap_or(256.0);
                    let h: f64 = parts[3].parse().unwrap_or(256.0);
                    canvas = (w.round() as usize, h.round() as usize);
                }
            }
        } else if tag_trim.starts_with("g ") || tag_trim == "g" {
            group_stack.push(attr(tag_trim, "id").unwrap_or("").to_string());
        } else if tag_trim.starts_with("/g") {
            group_stack.pop();
        } else if tag_trim.starts_with("path") {
            let in_skeleton = group_stack.iter().any(|g| g == "skeleton");
            if in_skeleton {
                continue;
            }
            let d = attr(tag_trim, "d").ok_or(Error::SvgParse {
                index: 0,
                message: "path element without d attribute".into(),
            })?;
            loops.push(parse_path_data::<F>(d)?);
        } else if tag_trim.starts_with("polyline") {
            let in_skeleton = group_stack.iter().any(|g| g == "skeleton");
            if !in_skeleton {
                continue;
            }
            if let Some(points) = attr(tag_trim, "points") {
                skeletons.push(parse_polyline_points::<F>(points)?);
            }
        }
    }
    Ok(VectorGlyph {
        loops,
        skeletons,
        canvas,
    })
}
