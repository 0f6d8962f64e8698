//! Boundary-graded triangulations of rectangular cavities.
//!
//! The boundary of a cavity is split into the hot wall `GammaN`, the cold wall
//! `GammaH` (together the Dirichlet part of the temperature boundary) and the
//! insulated remainder `Gamma2`. Meshes are tensor-product grids whose lines
//! parallel to each Dirichlet wall are stretched geometrically away from it, so
//! that the first interior mesh line sits exactly `delta` from the wall.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("grading infeasible: layer width {delta} exceeds core spacing {core_spacing}")]
    GradingInfeasible { delta: f64, core_spacing: f64 },
    #[error("gravity direction ({0}, {1}) is not a unit vector")]
    NonUnitGravity(f64, f64),
    #[error("mesh violates {} invariant(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<MeshViolation>),
    #[error("mesh file, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Boundary segment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Heated wall, `T = 1`.
    GammaN,
    /// Cooled wall, `T = 0`.
    GammaH,
    /// Insulated wall, zero normal heat flux.
    Gamma2,
}

impl BoundaryTag {
    /// Whether the temperature is prescribed on this segment.
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::Gamma2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::GammaN => "GammaN",
            BoundaryTag::GammaH => "GammaH",
            BoundaryTag::Gamma2 => "Gamma2",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "GammaN" => Ok(BoundaryTag::GammaN),
            "GammaH" => Ok(BoundaryTag::GammaH),
            "Gamma2" => Ok(BoundaryTag::Gamma2),
            other => Err(format!("unknown boundary tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavityKind {
    HeatedSidewalls,
    RayleighBenard,
    Custom,
}

/// Tag assigned to each of the four walls of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WallTags {
    /// `x = 0`
    pub left: BoundaryTag,
    /// `x = width`
    pub right: BoundaryTag,
    /// `y = 0`
    pub bottom: BoundaryTag,
    /// `y = height`
    pub top: BoundaryTag,
}

/// Rectangular cavity `[0, width] x [0, height]` with its boundary partition and
/// the unit vector `xi` along which the buoyancy force `Pr Ra xi T` acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityPreset {
    pub kind: CavityKind,
    pub width: f64,
    pub height: f64,
    pub xi: [f64; 2],
    pub walls: WallTags,
}

const UP: [f64; 2] = [0.0, 1.0];

impl CavityPreset {
    /// Differentially heated vertical walls: hot on the left, cold on the right.
    pub fn heated_sidewalls(width: f64, height: f64) -> Self {
        CavityPreset {
            kind: CavityKind::HeatedSidewalls,
            width,
            height,
            xi: UP,
            walls: WallTags {
                left: BoundaryTag::GammaN,
                right: BoundaryTag::GammaH,
                bottom: BoundaryTag::Gamma2,
                top: BoundaryTag::Gamma2,
            },
        }
    }

    /// Heated from below, cooled from above, insulated side walls.
    pub fn rayleigh_benard(width: f64, height: f64) -> Self {
        CavityPreset {
            kind: CavityKind::RayleighBenard,
            width,
            height,
            xi: UP,
            walls: WallTags {
                left: BoundaryTag::Gamma2,
                right: BoundaryTag::Gamma2,
                bottom: BoundaryTag::GammaN,
                top: BoundaryTag::GammaH,
            },
        }
    }

    pub fn custom(width: f64, height: f64, xi: [f64; 2], walls: WallTags) -> Self {
        CavityPreset { kind: CavityKind::Custom, width, height, xi, walls }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(MeshError::InvalidParameter(format!(
                "cavity extents must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        let norm = (self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]).sqrt();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(MeshError::NonUnitGravity(self.xi[0], self.xi[1]));
        }
        let w = self.walls;
        if ![w.left, w.right, w.bottom, w.top].iter().any(|t| t.is_dirichlet()) {
            return Err(MeshError::InvalidParameter(
                "at least one wall must carry a Dirichlet temperature tag".into(),
            ));
        }
        Ok(())
    }
}

/// Knobs of the geometric wall grading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingParams {
    /// Number of cells per axis at the core spacing (`extent / n_core`).
    pub n_core: usize,
    /// Distance of the first mesh line from each Dirichlet wall.
    pub delta: f64,
    /// Number of stretched layers next to each Dirichlet wall.
    pub n_layers: usize,
    /// Ratio between successive layer widths.
    pub stretch: f64,
}

impl GradingParams {
    /// Smallest layer count whose geometric widths reach the core spacing.
    pub fn layers_to_core(delta: f64, core_spacing: f64, stretch: f64) -> usize {
        if stretch <= 1.0 || delta >= core_spacing {
            return 1;
        }
        let mut n = 1;
        let mut w = delta;
        while w * stretch < core_spacing && n < 256 {
            w *= stretch;
            n += 1;
        }
        n
    }
}

/// `delta = c_delta / Ra`, the layer width that scales like the inverse Rayleigh number.
pub fn delta_from_rayleigh(rayleigh: f64, c_delta: f64) -> Result<f64, MeshError> {
    if !(rayleigh > 0.0) || !(c_delta > 0.0) {
        return Err(MeshError::InvalidParameter(format!(
            "Ra and c_delta must be positive, got Ra = {rayleigh}, c_delta = {c_delta}"
        )));
    }
    Ok(c_delta / rayleigh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming triangulation with tagged boundary edges. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    delta: f64,
    h_max: f64,
}

impl Mesh {
    /// Assembles a mesh from raw parts without checking any invariant; see [`validate_mesh`].
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        delta: f64,
    ) -> Mesh {
        let mut mesh = Mesh { vertices, triangles, boundary_edges, delta, h_max: 0.0 };
        mesh.h_max = (0..mesh.triangles.len()).map(|t| mesh.diameter(t)).fold(0.0, f64::max);
        mesh
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Distance of the first mesh line from the Dirichlet walls.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice the signed area; positive for counter-clockwise triangles.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        dist(p0, p1).max(dist(p1, p2)).max(dist(p2, p0))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Per-vertex flag: the vertex lies on a `GammaN` or `GammaH` edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.n_vertices()];
        for e in self.boundary_edges.iter().filter(|e| e.tag.is_dirichlet()) {
            on[e.vertices[0]] = true;
            on[e.vertices[1]] = true;
        }
        on
    }

    /// Indices of triangles with at least one vertex on the Dirichlet walls, ascending.
    pub fn dirichlet_layer(&self) -> Vec<usize> {
        let on = self.dirichlet_vertices();
        (0..self.n_triangles())
            .filter(|&t| self.triangles[t].iter().any(|&v| on[v]))
            .collect()
    }

    /// Largest diameter among the triangles touching the Dirichlet walls.
    pub fn layer_diameter(&self) -> f64 {
        self.dirichlet_layer().into_iter().map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Writes the plain-text node/element/boundary-edge format.
    ///
    /// ```text
    /// # boussinesq mesh v1
    /// delta <f64>
    /// vertices <n>
    /// <x> <y>                 (n lines)
    /// triangles <m>
    /// <a> <b> <c>             (m lines, 0-based, counter-clockwise)
    /// boundary_edges <k>
    /// <a> <b> <tag>           (k lines, tag in GammaN | GammaH | Gamma2)
    /// ```
    ///
    /// Floats use the shortest representation that parses back to the same bits.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# boussinesq mesh v1")?;
        writeln!(w, "delta {:?}", self.delta)?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:?} {:?}", v[0], v[1])?;
        }
        writeln!(w, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "boundary_edges {}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(w, "{} {} {}", e.vertices[0], e.vertices[1], e.tag)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_text`]. Reading stops after the
    /// boundary-edge block, so the mesh may be followed by other data.
    pub fn read_text<R: BufRead>(reader: &mut R) -> Result<Mesh, MeshError> {
        let mut lines = LineReader { reader, line: 0, buf: String::new() };
        let delta: f64 = lines.keyed("delta")?;
        let nv: usize = lines.keyed("vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = lines.fields(2)?;
            vertices.push([lines.parse(&f[0])?, lines.parse(&f[1])?]);
        }
        let nt: usize = lines.keyed("triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = lines.fields(3)?;
            triangles.push([lines.parse(&f[0])?, lines.parse(&f[1])?, lines.parse(&f[2])?]);
        }
        let ne: usize = lines.keyed("boundary_edges")?;
        let mut boundary_edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let f = lines.fields(3)?;
            let tag = f[2].parse::<BoundaryTag>().map_err(|m| lines.error(m))?;
            boundary_edges.push(BoundaryEdge { vertices: [lines.parse(&f[0])?, lines.parse(&f[1])?], tag });
        }
        for t in &triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(lines.error(format!("triangle {t:?} references a missing vertex")));
            }
        }
        Ok(Mesh::from_parts(vertices, triangles, boundary_edges, delta))
    }
}

struct LineReader<'a, R> {
    reader: &'a mut R,
    line: usize,
    buf: String,
}

impl<R: BufRead> LineReader<'_, R> {
    fn error(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse { line: self.line, message: message.into() }
    }

    fn next_data(&mut self) -> Result<Vec<String>, MeshError> {
        loop {
            self.buf.clear();
            self.line += 1;
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Err(self.error("unexpected end of file"));
            }
            let trimmed = self.buf.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.split_whitespace().map(str::to_owned).collect());
        }
    }

    fn fields(&mut self, n: usize) -> Result<Vec<String>, MeshError> {
        let f = self.next_data()?;
        if f.len() != n {
            return Err(self.error(format!("expected {n} fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T, MeshError> {
        let f = self.fields(2)?;
        if f[0] != key {
            return Err(self.error(format!("expected `{key}`, found `{}`", f[0])));
        }
        self.parse(&f[1])
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T, MeshError> {
        s.parse().map_err(|_| self.error(format!("cannot parse `{s}`")))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Mesh-line coordinates along one axis of length `length`, graded towards the
/// ends flagged in `graded`.
fn axis_lines(length: f64, graded: [bool; 2], params: &GradingParams) -> Result<Vec<f64>, MeshError> {
    let core = length / params.n_core as f64;
    if !graded[0] && !graded[1] {
        return Ok((0..=params.n_core).map(|i| length * i as f64 / params.n_core as f64).collect());
    }
    if params.delta > core {
        return Err(MeshError::GradingInfeasible { delta: params.delta, core_spacing: core });
    }
    let n_sides = graded.iter().filter(|&&g| g).count() as f64;
    if params.delta >= length / n_sides.max(2.0) {
        return Err(MeshError::InvalidParameter(format!(
            "delta = {} must be below half the cavity extent {}",
            params.delta, length
        )));
    }
    // Layer widths, growing geometrically until they reach the core spacing.
    let mut widths = Vec::with_capacity(params.n_layers);
    let mut w = params.delta;
    for _ in 0..params.n_layers {
        widths.push(w.min(core));
        w *= params.stretch;
    }
    let layer_total: f64 = widths.iter().sum();
    let remaining = length - n_sides * layer_total;
    if remaining <= 0.0 {
        return Err(MeshError::GradingInfeasible { delta: params.delta, core_spacing: core });
    }
    let n_mid = ((remaining / core).round() as usize).max(1);

    let mut lo = vec![0.0];
    if graded[0] {
        let mut x = 0.0;
        for w in &widths {
            x += w;
            lo.push(x);
        }
    }
    let mut hi = vec![length];
    if graded[1] {
        let mut x = length;
        for w in &widths {
            x -= w;
            hi.push(x);
        }
    }
    hi.reverse();
    let a = *lo.last().unwrap();
    let b = hi[0];
    let mut lines = lo;
    for i in 1..n_mid {
        lines.push(a + (b - a) * i as f64 / n_mid as f64);
    }
    lines.extend(hi);
    Ok(lines)
}

/// Builds the graded tensor-product triangulation of `preset`.
///
/// Each quad is split along its lower-left to upper-right diagonal, except the
/// two corner quads where that split would produce a triangle with two boundary
/// edges; those use the other diagonal.
pub fn generate_graded_mesh(preset: &CavityPreset, params: &GradingParams) -> Result<Mesh, MeshError> {
    preset.validate()?;
    if params.n_core < 2 {
        return Err(MeshError::InvalidParameter(format!("n_core must be at least 2, got {}", params.n_core)));
    }
    if !(params.delta > 0.0) || !params.delta.is_finite() {
        return Err(MeshError::InvalidParameter(format!("delta must be positive, got {}", params.delta)));
    }
    if params.n_layers == 0 {
        return Err(MeshError::InvalidParameter("n_layers must be at least 1".into()));
    }
    if !(params.stretch >= 1.0) {
        return Err(MeshError::InvalidParameter(format!("stretch must be >= 1, got {}", params.stretch)));
    }
    let w = preset.walls;
    let xs = axis_lines(preset.width, [w.left.is_dirichlet(), w.right.is_dirichlet()], params)?;
    let ys = axis_lines(preset.height, [w.bottom.is_dirichlet(), w.top.is_dirichlet()], params)?;
    Ok(tensor_mesh(preset, &xs, &ys, params.delta))
}

/// Uniform `n x n`-cell triangulation, including the coarse cases `n = 1, 2`
/// that graded generation rejects. The recorded layer width is the larger cell width.
pub fn generate_uniform_mesh(preset: &CavityPreset, n: usize) -> Result<Mesh, MeshError> {
    preset.validate()?;
    if n == 0 {
        return Err(MeshError::InvalidParameter("n must be positive".into()));
    }
    let lines = |l: f64| (0..=n).map(|i| l * i as f64 / n as f64).collect::<Vec<_>>();
    let delta = preset.width.max(preset.height) / n as f64;
    Ok(tensor_mesh(preset, &lines(preset.width), &lines(preset.height), delta))
}

fn tensor_mesh(preset: &CavityPreset, xs: &[f64], ys: &[f64], delta: f64) -> Mesh {
    let w = preset.walls;
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in ys {
        for &x in xs {
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            let flip = (i == nx - 1 && j == 0) || (i == 0 && j == ny - 1);
            let flip = flip && !(nx == 1 && ny == 1);
            if flip {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { vertices: [vid(i, 0), vid(i + 1, 0)], tag: w.bottom });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { vertices: [vid(nx, j), vid(nx, j + 1)], tag: w.right });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge { vertices: [vid(i + 1, ny), vid(i, ny)], tag: w.top });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge { vertices: [vid(0, j + 1), vid(0, j)], tag: w.left });
    }
    Mesh::from_parts(vertices, triangles, boundary_edges, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    NonPositiveArea { triangle: usize, area: f64 },
    VertexOutOfRange { triangle: usize },
    UntaggedBoundaryEdge { vertices: [usize; 2] },
    MultiplyTaggedEdge { vertices: [usize; 2] },
    TaggedInteriorEdge { vertices: [usize; 2] },
    NonManifoldEdge { vertices: [usize; 2] },
    NoDirichletBoundary,
    LayerTooWide { triangle: usize, distance: f64 },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshViolation::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive signed area {area:e}")
            }
            MeshViolation::VertexOutOfRange { triangle } => {
                write!(f, "triangle {triangle} references a missing vertex")
            }
            MeshViolation::UntaggedBoundaryEdge { vertices } => {
                write!(f, "boundary edge {vertices:?} carries no tag")
            }
            MeshViolation::MultiplyTaggedEdge { vertices } => {
                write!(f, "boundary edge {vertices:?} is tagged more than once")
            }
            MeshViolation::TaggedInteriorEdge { vertices } => {
                write!(f, "tagged edge {vertices:?} is not on the boundary")
            }
            MeshViolation::NonManifoldEdge { vertices } => {
                write!(f, "edge {vertices:?} is shared by more than two triangles")
            }
            MeshViolation::NoDirichletBoundary => write!(f, "no GammaN or GammaH edges"),
            MeshViolation::LayerTooWide { triangle, distance } => write!(
                f,
                "triangle {triangle} touches the Dirichlet walls but reaches {distance:e} into the interior"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub h_max: f64,
    /// Largest diameter among triangles touching the Dirichlet walls.
    pub delta: f64,
    /// Distance of the first mesh line from the Dirichlet walls, as stored on the mesh.
    pub first_line: f64,
    /// Largest distance from the Dirichlet walls reached by a wall-touching triangle.
    pub layer_depth: f64,
    pub n_triangles: usize,
    pub n_vertices: usize,
    /// Smallest interior angle over all triangles, in degrees.
    pub min_angle_deg: f64,
    pub area: f64,
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

fn min_angle(c: [[f64; 2]; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let p = c[k];
        let q = c[(k + 1) % 3];
        let r = c[(k + 2) % 3];
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
        best = best.min(cos.clamp(-1.0, 1.0).acos());
    }
    best.to_degrees()
}

/// Checks every mesh invariant and reports the derived sizes.
pub fn validate_mesh(mesh: &Mesh) -> Result<MeshReport, MeshError> {
    let mut violations = Vec::new();
    let nv = mesh.n_vertices();
    let mut edge_count: HashMap<[usize; 2], usize> = HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if tri.iter().any(|&v| v >= nv) {
            violations.push(MeshViolation::VertexOutOfRange { triangle: t });
            continue;
        }
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            violations.push(MeshViolation::NonPositiveArea { triangle: t, area });
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *edge_count.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    if !violations.is_empty() {
        return Err(MeshError::Invalid(violations));
    }
    let mut tagged: HashMap<[usize; 2], usize> = HashMap::new();
    for e in mesh.boundary_edges() {
        let key = [e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1])];
        *tagged.entry(key).or_default() += 1;
    }
    let mut sorted_edges: Vec<_> = edge_count.iter().collect();
    sorted_edges.sort();
    for (key, &count) in sorted_edges {
        if count > 2 {
            violations.push(MeshViolation::NonManifoldEdge { vertices: *key });
        } else if count == 1 {
            match tagged.get(key) {
                None => violations.push(MeshViolation::UntaggedBoundaryEdge { vertices: *key }),
                Some(&n) if n > 1 => violations.push(MeshViolation::MultiplyTaggedEdge { vertices: *key }),
                _ => {}
            }
        }
    }
    let mut tagged_keys: Vec<_> = tagged.keys().collect();
    tagged_keys.sort();
    for key in tagged_keys {
        if edge_count.get(key) != Some(&1) {
            violations.push(MeshViolation::TaggedInteriorEdge { vertices: *key });
        }
    }
    let walls: Vec<_> = mesh
        .boundary_edges()
        .iter()
        .filter(|e| e.tag.is_dirichlet())
        .map(|e| (mesh.vertices()[e.vertices[0]], mesh.vertices()[e.vertices[1]]))
        .collect();
    if walls.is_empty() {
        violations.push(MeshViolation::NoDirichletBoundary);
    }
    let layer = mesh.dirichlet_layer();
    let mut layer_depth: f64 = 0.0;
    let tol = 1e-12 * mesh.h_max().max(mesh.delta());
    for &t in &layer {
        let depth = mesh
            .corners(t)
            .iter()
            .map(|&p| walls.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        layer_depth = layer_depth.max(depth);
        if depth > mesh.delta() + tol {
            violations.push(MeshViolation::LayerTooWide { triangle: t, distance: depth });
        }
    }
    if !violations.is_empty() {
        return Err(MeshError::Invalid(violations));
    }
    let min_angle_deg = (0..mesh.n_triangles()).map(|t| min_angle(mesh.corners(t))).fold(f64::INFINITY, f64::min);
    Ok(MeshReport {
        h_max: mesh.h_max(),
        delta: mesh.layer_diameter(),
        first_line: mesh.delta(),
        layer_depth,
        n_triangles: mesh.n_triangles(),
        n_vertices: nv,
        min_angle_deg,
        area: mesh.total_area(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4() -> Mesh {
        let params = GradingParams { n_core: 4, delta: 0.25, n_layers: 1, stretch: 1.0 };
        generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap()
    }

    #[test]
    fn uniform_grading_degenerates_to_uniform_mesh() {
        let mesh = uniform4();
        assert_eq!(mesh.n_vertices(), 25);
        assert_eq!(mesh.n_triangles(), 32);
        for (k, v) in mesh.vertices().iter().enumerate() {
            let (i, j) = (k % 5, k / 5);
            assert_eq!(v[0], 0.25 * i as f64);
            assert_eq!(v[1], 0.25 * j as f64);
        }
        let report = validate_mesh(&mesh).unwrap();
        assert!((report.h_max - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(report.first_line, 0.25);
        assert_eq!(report.delta, report.h_max);
        assert!((report.min_angle_deg - 45.0).abs() < 1e-9);
    }

    #[test]
    fn strong_grading_puts_first_line_at_delta() {
        let params = GradingParams { n_core: 8, delta: 1e-3, n_layers: 6, stretch: 2.0 };
        let mesh = generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap();
        let mut xs: Vec<f64> = mesh.vertices().iter().map(|v| v[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert_eq!(xs[1], 1e-3);
        assert_eq!(xs[xs.len() - 2], 1.0 - 1e-3);
        assert!((xs[2] - xs[1] - 2e-3).abs() < 1e-15);
        let report = validate_mesh(&mesh).unwrap();
        assert!(report.layer_depth <= 1e-3 * (1.0 + 1e-12));
        // Wall cells are 1e-3 wide and 1/8 tall.
        let aspect = 0.125 / 1e-3;
        assert!(report.delta <= 1e-3 * aspect * 1.01);
        assert_eq!(report.delta, mesh.layer_diameter());
    }

    #[test]
    fn rayleigh_benard_tags() {
        let params = GradingParams { n_core: 8, delta: 1e-3, n_layers: 6, stretch: 2.0 };
        let mesh = generate_graded_mesh(&CavityPreset::rayleigh_benard(1.0, 1.0), &params).unwrap();
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
            let expected = if a[1] == 0.0 && b[1] == 0.0 {
                BoundaryTag::GammaN
            } else if a[1] == 1.0 && b[1] == 1.0 {
                BoundaryTag::GammaH
            } else {
                BoundaryTag::Gamma2
            };
            assert_eq!(e.tag, expected, "edge {a:?}-{b:?}");
        }
        let mut ys: Vec<f64> = mesh.vertices().iter().map(|v| v[1]).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        assert_eq!(ys[1], 1e-3);
    }

    #[test]
    fn delta_from_rayleigh_examples() {
        assert_eq!(delta_from_rayleigh(1000.0, 1.0).unwrap(), 1e-3);
        assert_eq!(delta_from_rayleigh(1.0, 0.125).unwrap(), 0.125);
        assert_eq!(delta_from_rayleigh(1e4, 0.5).unwrap(), 5e-5);
        assert!(delta_from_rayleigh(0.0, 1.0).is_err());
        assert!(delta_from_rayleigh(1.0, -1.0).is_err());
    }

    #[test]
    fn rejects_infeasible_grading_and_bad_gravity() {
        let params = GradingParams { n_core: 4, delta: 0.3, n_layers: 1, stretch: 1.0 };
        let err = generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap_err();
        assert!(matches!(err, MeshError::GradingInfeasible { .. }), "{err}");

        let mut preset = CavityPreset::heated_sidewalls(1.0, 1.0);
        preset.xi = [0.0, 2.0];
        let params = GradingParams { n_core: 4, delta: 0.1, n_layers: 1, stretch: 1.0 };
        assert!(matches!(generate_graded_mesh(&preset, &params), Err(MeshError::NonUnitGravity(..))));
    }

    #[test]
    fn flipped_triangle_is_reported() {
        let mesh = uniform4();
        let mut tris = mesh.triangles().to_vec();
        tris[5].swap(1, 2);
        let bad = Mesh::from_parts(mesh.vertices().to_vec(), tris, mesh.boundary_edges().to_vec(), mesh.delta());
        match validate_mesh(&bad) {
            Err(MeshError::Invalid(v)) => {
                assert!(v.iter().any(|x| matches!(x, MeshViolation::NonPositiveArea { triangle: 5, .. })))
            }
            other => panic!("expected orientation violation, got {other:?}"),
        }
    }

    #[test]
    fn untagged_edge_is_reported() {
        let mesh = uniform4();
        let mut edges = mesh.boundary_edges().to_vec();
        let removed = edges.remove(3);
        let bad = Mesh::from_parts(mesh.vertices().to_vec(), mesh.triangles().to_vec(), edges, mesh.delta());
        let key = [removed.vertices[0].min(removed.vertices[1]), removed.vertices[0].max(removed.vertices[1])];
        match validate_mesh(&bad) {
            Err(MeshError::Invalid(v)) => assert!(v.contains(&MeshViolation::UntaggedBoundaryEdge { vertices: key })),
            other => panic!("expected tagging violation, got {other:?}"),
        }
    }

    #[test]
    fn no_triangle_has_two_boundary_edges() {
        let params = GradingParams { n_core: 5, delta: 0.05, n_layers: 3, stretch: 1.5 };
        for preset in [CavityPreset::heated_sidewalls(2.0, 1.0), CavityPreset::rayleigh_benard(1.0, 1.0)] {
            let mesh = generate_graded_mesh(&preset, &params).unwrap();
            let on_boundary: std::collections::HashSet<[usize; 2]> = mesh
                .boundary_edges()
                .iter()
                .map(|e| [e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1])])
                .collect();
            for tri in mesh.triangles() {
                let n = (0..3)
                    .filter(|&k| {
                        let (a, b) = (tri[k], tri[(k + 1) % 3]);
                        on_boundary.contains(&[a.min(b), a.max(b)])
                    })
                    .count();
                assert!(n <= 1, "triangle {tri:?}");
            }
        }
    }

    #[test]
    fn text_round_trip_is_bitwise() {
        let params = GradingParams { n_core: 6, delta: 1e-3, n_layers: 5, stretch: 2.0 };
        let mesh = generate_graded_mesh(&CavityPreset::heated_sidewalls(1.0, 1.0), &params).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn layers_to_core_reaches_core_spacing() {
        assert_eq!(GradingParams::layers_to_core(1e-3, 0.0625, 2.0), 6);
        assert_eq!(GradingParams::layers_to_core(0.25, 0.25, 1.0), 1);
    }
}
