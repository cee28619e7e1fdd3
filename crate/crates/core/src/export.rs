//! File artifacts: energy and objective CSVs, coefficient files, fronts and
//! SVG drawings of shapes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intersect::ObstacleCircle;
use crate::mesh::MeshGrid;
use crate::optimizers::{EnergyRecord, Evaluation};
use crate::pareto::FrontPoint;

/// One row of an energy history; objective components are NaN when unknown.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub k: usize,
    pub t: f64,
    pub e_pot: f64,
    pub e_kin: f64,
    pub e_tot: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

impl EnergyRow {
    pub fn new(record: &EnergyRecord, evaluation: Option<&Evaluation>) -> Self {
        let [j1, j2, j3] = evaluation.and_then(|e| e.components).unwrap_or([f64::NAN; 3]);
        Self { k: record.k, t: record.t, e_pot: record.e_pot, e_kin: record.e_kin, e_tot: record.e_tot, j1, j2, j3 }
    }

    pub fn record(&self) -> EnergyRecord {
        EnergyRecord { k: self.k, t: self.t, e_pot: self.e_pot, e_kin: self.e_kin, e_tot: self.e_tot }
    }
}

/// Pairs each energy record with the evaluation taken at the same step.
pub fn energy_rows(energy: &[EnergyRecord], evaluations: &[Evaluation]) -> Vec<EnergyRow> {
    energy.iter().enumerate().map(|(i, r)| EnergyRow::new(r, evaluations.get(i))).collect()
}

pub fn write_energy_csv(path: &Path, rows: &[EnergyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Per-iterate objective values with the free coefficients.
pub fn write_objectives_csv(path: &Path, rows: &[EnergyRow], trajectory: &[(usize, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = trajectory.first().map_or(0, |(_, q)| q.len());
    let mut header = vec!["k".to_string(), "j_lambda".into(), "j1".into(), "j2".into(), "j3".into()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    w.write_record(&header)?;
    for (k, q) in trajectory {
        let Some(row) = rows.iter().find(|r| r.k == *k) else { continue };
        let mut rec = vec![k.to_string(), row.e_pot.to_string(), row.j1.to_string(), row.j2.to_string(), row.j3.to_string()];
        rec.extend(q.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_front_csv(path: &Path, front: &[FrontPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = front.first().map_or(0, |p| p.q_opt.len());
    let mut header: Vec<String> =
        ["weight", "j1", "j2", "residual", "iterations", "converged"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=n).map(|i| format!("q{i}")));
    w.write_record(&header)?;
    for p in front {
        let mut rec = vec![
            p.weight.to_string(),
            p.j1.to_string(),
            p.j2.to_string(),
            p.residual.to_string(),
            p.iterations.to_string(),
            p.converged.to_string(),
        ];
        rec.extend(p.q_opt.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One coefficient per line; shortest round-trip decimal form.
pub fn write_coefficients(path: &Path, q: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# free coefficients: meanline then thickness")?;
    for v in q {
        writeln!(f, "{v}")?;
    }
    Ok(())
}

/// Accepts whitespace- or comma-separated values; `#` starts a comment.
pub fn parse_coefficients(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("bad coefficient {t:?}: {e}"))))
        .collect()
}

pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read coefficient file {}: {e}", path.display())))?;
    parse_coefficients(&text)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgOptions {
    /// User units per meter, applied to both axes.
    pub scale: f64,
    pub mesh_edges: bool,
    /// Padding around the drawing in meters.
    pub padding: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { scale: 500.0, mesh_edges: false, padding: 0.05 }
    }
}

/// Shape outline and obstacle at a common scale, y pointing up.
pub fn shape_svg(mesh: &MeshGrid, circle: &ObstacleCircle, title: &str, opts: &SvgOptions) -> Result<String> {
    let outline = mesh
        .outline()
        .ok_or_else(|| Error::Contract("SVG export needs a structured grid mesh".into()))?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &outline {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let [cx, cy] = circle.center;
    x0 = x0.min(cx - circle.radius) - opts.padding;
    x1 = x1.max(cx + circle.radius) + opts.padding;
    y0 = y0.min(cy - circle.radius) - opts.padding;
    y1 = y1.max(cy + circle.radius) + opts.padding;
    let s = opts.scale;
    let px = |x: f64| (x - x0) * s;
    let py = |y: f64| (y1 - y) * s;
    let (w, h) = ((x1 - x0) * s, (y1 - y0) * s);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}" preserveAspectRatio="xMidYMid meet">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    if opts.mesh_edges {
        let _ = write!(out, r##"<g stroke="#9ab" stroke-width="0.5" fill="none">"##);
        for e in 0..mesh.triangles.len() {
            let v = mesh.vertices(e);
            let _ = write!(
                out,
                r#"<polygon points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}"/>"#,
                px(v[0][0]),
                py(v[0][1]),
                px(v[1][0]),
                py(v[1][1]),
                px(v[2][0]),
                py(v[2][1])
            );
        }
        let _ = writeln!(out, "</g>");
    }
    let mut pts: Vec<String> = outline.iter().map(|p| format!("{:.3},{:.3}", px(p[0]), py(p[1]))).collect();
    pts.push(pts[0].clone());
    let _ = writeln!(
        out,
        r##"<polyline class="outline" points="{}" fill="#d8c9a8" fill-opacity="0.6" stroke="#333" stroke-width="1.5"/>"##,
        pts.join(" ")
    );
    let _ = writeln!(
        out,
        r##"<circle class="obstacle" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#8a4fbf" fill-opacity="0.5" stroke="#5b2a86"/>"##,
        px(cx),
        py(cy),
        circle.radius * s
    );
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_shape_svg(
    path: &Path,
    mesh: &MeshGrid,
    circle: &ObstacleCircle,
    title: &str,
    opts: &SvgOptions,
) -> Result<()> {
    std::fs::write(path, shape_svg(mesh, circle, title, opts)?)?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
