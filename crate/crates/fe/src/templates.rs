//! Structured mesh templates: block, clamped beam or double beam with bridges, and shallow arch.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;
use crate::quadrature::{ElementKind, HEX8_CORNERS, TET10_EDGES};
use crate::FeError;

/// Rectangular box `[0, size]` split into `divisions` hexahedral cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub size: [f64; 3],
    pub divisions: [usize; 3],
    pub element: ElementKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamLayout {
    Single,
    Double,
}

/// Beam along `x` with thickness along `y` and depth along `z`.
///
/// The double layout stacks two beams separated by `gap` and joins them by bridges of width
/// `bridge_width` centred at `bridges`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub length: f64,
    pub thickness: f64,
    pub depth: f64,
    pub layout: BeamLayout,
    #[serde(default)]
    pub gap: f64,
    #[serde(default)]
    pub bridges: Vec<f64>,
    #[serde(default)]
    pub bridge_width: f64,
    /// Cells along the length, through one beam thickness, and through the depth.
    pub divisions: [usize; 3],
    pub element: ElementKind,
}

impl BeamParams {
    /// Single clamped-clamped beam.
    pub fn single(length: f64, thickness: f64, depth: f64, divisions: [usize; 3], element: ElementKind) -> Self {
        Self {
            length,
            thickness,
            depth,
            layout: BeamLayout::Single,
            gap: 0.0,
            bridges: Vec::new(),
            bridge_width: 0.0,
            divisions,
            element,
        }
    }

    /// Two 1000 × 5 × 12 beams, 5 apart, joined at mid-span and 311 and 316 to either side of it.
    pub fn double_beam(divisions: [usize; 3], bridge_width: f64, element: ElementKind) -> Self {
        let length = 1000.0;
        Self {
            length,
            thickness: 5.0,
            depth: 12.0,
            layout: BeamLayout::Double,
            gap: 5.0,
            bridges: vec![0.5 * length - 311.0, 0.5 * length, 0.5 * length + 316.0],
            bridge_width,
            divisions,
            element,
        }
    }
}

/// Two parallel shallow arches `y ← y + rise·sin(πx/span)` joined at mid-span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchParams {
    pub span: f64,
    pub thickness: f64,
    pub depth: f64,
    pub rise: f64,
    pub gap: f64,
    pub bridge_width: f64,
    pub divisions: [usize; 3],
    pub element: ElementKind,
}

impl ArchParams {
    /// Span 530, depth 20, thickness 5, outer width 20 and rise 13.4.
    pub fn mems_arch(divisions: [usize; 3], bridge_width: f64, element: ElementKind) -> Self {
        Self { span: 530.0, thickness: 5.0, depth: 20.0, rise: 13.4, gap: 10.0, bridge_width, divisions, element }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "lowercase")]
pub enum Template {
    Block(BlockParams),
    Beam(BeamParams),
    Arch(ArchParams),
}

/// Grid lines through `[0, length]` honouring `breaks`, with cells no longer than `length / cells`.
fn graded_lines(length: f64, cells: usize, breaks: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = std::iter::once(0.0)
        .chain(breaks.iter().copied().filter(|&b| b > 0.0 && b < length))
        .chain(std::iter::once(length))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * length);
    let h = length / cells as f64;
    let mut out = vec![0.0];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    out
}

fn uniform(length: f64, cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| length * i as f64 / cells as f64).collect()
}

/// Hexahedral cells of a tensor grid, a subset of which is meshed.
struct Grid {
    lines: [Vec<f64>; 3],
    active: Vec<bool>,
}

impl Grid {
    fn cells(&self) -> [usize; 3] {
        std::array::from_fn(|d| self.lines[d].len() - 1)
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        let n = self.cells();
        (c[2] * n[1] + c[1]) * n[0] + c[0]
    }

    fn point(&self, p: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|d| self.lines[d][p[d]])
    }

    /// Mesh in parameter space plus the mapped mesh.
    fn build(&self, kind: ElementKind, map: impl Fn([f64; 3]) -> [f64; 3]) -> (Mesh, Vec<[f64; 3]>) {
        let n = self.cells();
        let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
        let mut param: Vec<[f64; 3]> = Vec::new();
        let mut hexes: Vec<[usize; 8]> = Vec::new();
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    if !self.active[self.cell_index([i, j, k])] {
                        continue;
                    }
                    let hex = HEX8_CORNERS.map(|c| {
                        let p = [i + (c[0] > 0.0) as usize, j + (c[1] > 0.0) as usize, k + (c[2] > 0.0) as usize];
                        *ids.entry(p).or_insert_with(|| {
                            param.push(self.point(p));
                            param.len() - 1
                        })
                    });
                    hexes.push(hex);
                }
            }
        }
        let elements: Vec<Vec<usize>> = match kind {
            ElementKind::Hex8 => hexes.iter().map(|h| h.to_vec()).collect(),
            ElementKind::Tet10 => {
                let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
                let mut out = Vec::with_capacity(6 * hexes.len());
                for h in &hexes {
                    for mut tet in kuhn_tets(h) {
                        if signed_volume(&param, &tet) < 0.0 {
                            tet.swap(1, 2);
                        }
                        let mut conn = tet.to_vec();
                        for [a, b] in TET10_EDGES {
                            let key = (tet[a].min(tet[b]), tet[a].max(tet[b]));
                            let id = *edges.entry(key).or_insert_with(|| {
                                let (pa, pb) = (param[key.0], param[key.1]);
                                param.push(std::array::from_fn(|d| 0.5 * (pa[d] + pb[d])));
                                param.len() - 1
                            });
                            conn.push(id);
                        }
                        out.push(conn);
                    }
                }
                out
            }
        };
        let nodes = param.iter().map(|&p| map(p)).collect();
        (Mesh { nodes, elements, kind, sets: BTreeMap::new() }, param)
    }
}

/// Local hexahedron corner with bits `(x, y, z)`.
fn corner(h: &[usize; 8], bits: [usize; 3]) -> usize {
    let pos = HEX8_CORNERS
        .iter()
        .position(|c| (0..3).all(|d| (c[d] > 0.0) as usize == bits[d]))
        .expect("every bit pattern is a corner");
    h[pos]
}

/// Six tetrahedra along the main diagonal; conforming on a tensor grid.
fn kuhn_tets(h: &[usize; 8]) -> Vec<[usize; 4]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| {
            let mut bits = [0usize; 3];
            let v0 = corner(h, bits);
            bits[p[0]] = 1;
            let v1 = corner(h, bits);
            bits[p[1]] = 1;
            let v2 = corner(h, bits);
            [v0, v1, v2, corner(h, [1, 1, 1])]
        })
        .collect()
}

fn signed_volume(x: &[[f64; 3]], t: &[usize; 4]) -> f64 {
    let d = |i: usize| -> [f64; 3] { std::array::from_fn(|k| x[t[i]][k] - x[t[0]][k]) };
    let (a, b, c) = (d(1), d(2), d(3));
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn add_set(mesh: &mut Mesh, param: &[[f64; 3]], name: &str, pred: impl Fn([f64; 3]) -> bool) {
    let nodes: Vec<usize> = (0..param.len()).filter(|&i| pred(param[i])).collect();
    mesh.sets.insert(name.to_string(), nodes);
}

fn positive(name: &str, v: f64) -> Result<(), FeError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(FeError::Geometry(format!("{name} must be positive, got {v}")))
    }
}

fn check_divisions(d: [usize; 3]) -> Result<(), FeError> {
    if d.iter().any(|&n| n == 0) {
        return Err(FeError::Geometry(format!("subdivisions must be positive, got {d:?}")));
    }
    Ok(())
}

fn add_end_sets(mesh: &mut Mesh, param: &[[f64; 3]], length: f64) {
    let tol = 1e-9 * length;
    add_set(mesh, param, "x0", |p| p[0].abs() < tol);
    add_set(mesh, param, "x1", |p| (p[0] - length).abs() < tol);
    add_set(mesh, param, "clamped", |p| p[0].abs() < tol || (p[0] - length).abs() < tol);
}

fn block(p: &BlockParams) -> Result<Mesh, FeError> {
    for (d, name) in ["size x", "size y", "size z"].iter().enumerate() {
        positive(name, p.size[d])?;
    }
    check_divisions(p.divisions)?;
    let lines: [Vec<f64>; 3] = std::array::from_fn(|d| uniform(p.size[d], p.divisions[d]));
    let grid = Grid { active: vec![true; p.divisions.iter().product()], lines };
    let (mut mesh, param) = grid.build(p.element, |x| x);
    for (d, axis) in ["x", "y", "z"].iter().enumerate() {
        let tol = 1e-9 * p.size[d];
        add_set(&mut mesh, &param, &format!("{axis}0"), |q| q[d].abs() < tol);
        add_set(&mut mesh, &param, &format!("{axis}1"), |q| (q[d] - p.size[d]).abs() < tol);
    }
    Ok(mesh)
}

/// Layers across the thickness: one beam, or beam, gap and beam.
fn stacked_lines(thickness: f64, gap: f64, cells: usize, double: bool) -> (Vec<f64>, Option<(f64, f64)>) {
    if !double {
        return (uniform(thickness, cells), None);
    }
    let mut ys = uniform(thickness, cells);
    let gap_cells = ((gap / thickness) * cells as f64).round().max(1.0) as usize;
    for i in 1..=gap_cells {
        ys.push(thickness + gap * i as f64 / gap_cells as f64);
    }
    for i in 1..=cells {
        ys.push(thickness + gap + thickness * i as f64 / cells as f64);
    }
    (ys, Some((thickness, thickness + gap)))
}

fn bridged_grid(
    length: f64,
    thickness: f64,
    depth: f64,
    gap: f64,
    double: bool,
    bridges: &[f64],
    bridge_width: f64,
    divisions: [usize; 3],
) -> Result<Grid, FeError> {
    positive("length", length)?;
    positive("thickness", thickness)?;
    positive("depth", depth)?;
    check_divisions(divisions)?;
    if double {
        positive("gap", gap)?;
        positive("bridge width", bridge_width)?;
        if bridges.is_empty() {
            return Err(FeError::Geometry("double layout needs at least one bridge".into()));
        }
        for &b in bridges {
            if b - 0.5 * bridge_width < 0.0 || b + 0.5 * bridge_width > length {
                return Err(FeError::Geometry(format!("bridge at {b} leaves the span")));
            }
        }
    }
    let breaks: Vec<f64> = if double {
        bridges.iter().flat_map(|&b| [b - 0.5 * bridge_width, b + 0.5 * bridge_width]).collect()
    } else {
        Vec::new()
    };
    let xs = graded_lines(length, divisions[0], &breaks);
    let (ys, gap_band) = stacked_lines(thickness, gap, divisions[1], double);
    let zs = uniform(depth, divisions[2]);
    let mut grid = Grid { lines: [xs, ys, zs], active: Vec::new() };
    let n = grid.cells();
    grid.active = vec![true; n.iter().product()];
    if let Some((lo, hi)) = gap_band {
        let tol = 1e-9 * length;
        for k in 0..n[2] {
            for j in 0..n[1] {
                let yc = 0.5 * (grid.lines[1][j] + grid.lines[1][j + 1]);
                if yc <= lo || yc >= hi {
                    continue;
                }
                for i in 0..n[0] {
                    let xc = 0.5 * (grid.lines[0][i] + grid.lines[0][i + 1]);
                    let bridged = bridges.iter().any(|&b| (xc - b).abs() < 0.5 * bridge_width + tol);
                    let idx = grid.cell_index([i, j, k]);
                    grid.active[idx] = bridged;
                }
            }
        }
    }
    Ok(grid)
}

fn beam(p: &BeamParams) -> Result<Mesh, FeError> {
    let double = p.layout == BeamLayout::Double;
    let grid = bridged_grid(p.length, p.thickness, p.depth, p.gap, double, &p.bridges, p.bridge_width, p.divisions)?;
    let (mut mesh, param) = grid.build(p.element, |x| x);
    add_end_sets(&mut mesh, &param, p.length);
    Ok(mesh)
}

fn arch(p: &ArchParams) -> Result<Mesh, FeError> {
    if !(p.rise >= 0.0) {
        return Err(FeError::Geometry(format!("rise must be non-negative, got {}", p.rise)));
    }
    let mid = [0.5 * p.span];
    let grid = bridged_grid(p.span, p.thickness, p.depth, p.gap, true, &mid, p.bridge_width, p.divisions)?;
    let (span, rise) = (p.span, p.rise);
    let (mut mesh, param) =
        grid.build(p.element, |x| [x[0], x[1] + rise * (std::f64::consts::PI * x[0] / span).sin(), x[2]]);
    add_end_sets(&mut mesh, &param, p.span);
    Ok(mesh)
}

/// Builds the mesh of a template and checks its Jacobians.
pub fn generate_mesh(template: &Template) -> Result<Mesh, FeError> {
    let mesh = match template {
        Template::Block(p) => block(p)?,
        Template::Beam(p) => beam(p)?,
        Template::Arch(p) => arch(p)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lines_hit_breaks() {
        let xs = graded_lines(10.0, 4, &[3.0, 3.5]);
        assert!(xs.iter().any(|&x| (x - 3.0).abs() < 1e-12));
        assert!(xs.iter().any(|&x| (x - 3.5).abs() < 1e-12));
        assert!(xs.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 2.5 + 1e-12));
        assert_eq!(*xs.last().unwrap(), 10.0);
    }

    #[test]
    fn kuhn_volume_sums_to_cube() {
        let h: [usize; 8] = std::array::from_fn(|i| i);
        let x: Vec<[f64; 3]> = HEX8_CORNERS.iter().map(|c| c.map(|v| 0.5 * (v + 1.0))).collect();
        let total: f64 = kuhn_tets(&h).iter().map(|t| signed_volume(&x, t).abs() / 6.0).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
}
