//! Uniform structured grids on the unit cube, boundary-face labels,
//! stair-cased scatterer masks and grid-to-grid transfer.
//!
//! Nodes are ordered lexicographically with x fastest. The last axis is the
//! vertical one: its upper face is the incoming-wave ("top") face.

use std::fs;
use std::io::Write;
use std::ops::{Add, Mul};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexCsrMatrix};

/// Magic prefix of a voxel mask file.
pub const VOXEL_MAGIC: &[u8; 8] = b"VOXMASK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredGrid {
    dim: usize,
    m: usize,
}

impl StructuredGrid {
    /// `dim` in 1..=3 (1D grids carry boundary-face fields and the
    /// one-dimensional test systems), `m >= 3` nodes per axis.
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if m < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 nodes per axis, got {m}"
            )));
        }
        Ok(Self { dim, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow(axis as u32)
    }

    /// Per-axis integer indices of node `idx`; unused axes are 0.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = idx;
        for slot in out.iter_mut().take(self.dim) {
            *slot = rest % self.m;
            rest /= self.m;
        }
        out
    }

    pub fn linear_index(&self, ijk: &[usize]) -> usize {
        ijk.iter()
            .take(self.dim)
            .rev()
            .fold(0, |acc, &i| acc * self.m + i)
    }

    /// Node coordinates; unused axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let ijk = self.multi_index(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = ijk[d] as f64 * h;
        }
        x
    }

    /// All node coordinates, `dim` values per node.
    pub fn all_coords(&self) -> Vec<Vec<f64>> {
        (0..self.num_nodes())
            .map(|i| self.coords(i)[..self.dim].to_vec())
            .collect()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let ijk = self.multi_index(idx);
        ijk[..self.dim].iter().any(|&i| i == 0 || i == self.m - 1)
    }

    /// The (dim-1)-dimensional grid of one boundary face.
    pub fn face_grid(&self) -> Result<Self> {
        Self::new(self.dim - 1, self.m)
    }

    /// Index of node `idx` within its face grid along `axis` (drops that axis).
    pub fn face_index(&self, idx: usize, axis: usize) -> usize {
        let ijk = self.multi_index(idx);
        let mut out = 0;
        for d in (0..self.dim).rev() {
            if d != axis {
                out = out * self.m + ijk[d];
            }
        }
        out
    }
}

/// Boundary face of the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Left,
    Right,
    Front,
    Back,
    Bottom,
    Top,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Left,
        Face::Right,
        Face::Front,
        Face::Back,
        Face::Bottom,
        Face::Top,
    ];

    /// Face at the low (`high = false`) or high end of `axis`.
    pub fn of(dim: usize, axis: usize, high: bool) -> Face {
        let pair = if dim >= 2 && axis == dim - 1 {
            (Face::Bottom, Face::Top)
        } else if axis == 0 {
            (Face::Left, Face::Right)
        } else {
            (Face::Front, Face::Back)
        };
        if high {
            pair.1
        } else {
            pair.0
        }
    }

    /// `(axis, high)` of this face in a `dim`-dimensional grid, if it exists.
    pub fn axis_side(self, dim: usize) -> Option<(usize, bool)> {
        let (axis, high) = match self {
            Face::Left => (0, false),
            Face::Right => (0, true),
            Face::Front if dim == 3 => (1, false),
            Face::Back if dim == 3 => (1, true),
            Face::Bottom if dim >= 2 => (dim - 1, false),
            Face::Top if dim >= 2 => (dim - 1, true),
            _ => return None,
        };
        Some((axis, high))
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Face labels of every node; interior nodes carry none.
#[derive(Debug, Clone)]
pub struct BoundaryClassification {
    labels: Vec<u8>,
}

impl BoundaryClassification {
    pub fn new(grid: &StructuredGrid) -> Self {
        let m = grid.nodes_per_axis();
        let labels = (0..grid.num_nodes())
            .map(|idx| {
                let ijk = grid.multi_index(idx);
                let mut bits = 0u8;
                for axis in 0..grid.dim() {
                    if ijk[axis] == 0 {
                        bits |= Face::of(grid.dim(), axis, false).bit();
                    }
                    if ijk[axis] == m - 1 {
                        bits |= Face::of(grid.dim(), axis, true).bit();
                    }
                }
                bits
            })
            .collect();
        Self { labels }
    }

    pub fn faces(&self, idx: usize) -> Vec<Face> {
        let bits = self.labels[idx];
        Face::ALL.into_iter().filter(|f| bits & f.bit() != 0).collect()
    }

    pub fn has(&self, idx: usize, face: Face) -> bool {
        self.labels[idx] & face.bit() != 0
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.labels[idx] != 0
    }
}

/// Parameters of the procedural submarine stand-in: an x-aligned capsule hull
/// with a sail box on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapsuleSailParams {
    pub center: [f64; 3],
    pub length: f64,
    pub radius: f64,
    /// Sail extent along x, y, z.
    pub sail: [f64; 3],
}

impl Default for CapsuleSailParams {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5, 0.45],
            length: 0.6,
            radius: 0.08,
            sail: [0.1, 0.04, 0.08],
        }
    }
}

/// Scatterer primitive. Containment is closed: boundary points are inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Cube { center: Vec<f64>, side: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Triangle2d { vertices: [[f64; 2]; 3] },
    CapsuleSail {
        #[serde(default)]
        params: CapsuleSailParams,
    },
    VoxelFile { path: PathBuf },
}

const CONTAIN_EPS: f64 = 1e-12;

impl Shape {
    /// Axis-aligned bounding box `(lo, hi)`, `None` for voxel files.
    fn bounding_box(&self, dim: usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let check_len = |c: &[f64]| {
            if c.len() != dim {
                Err(Error::Geometry(format!(
                    "shape center has {} coordinates on a {dim}D grid",
                    c.len()
                )))
            } else {
                Ok(())
            }
        };
        Ok(Some(match self {
            Shape::Cube { center, side } => {
                check_len(center)?;
                if *side <= 0.0 {
                    return Err(Error::Geometry("cube side must be positive".into()));
                }
                (
                    center.iter().map(|c| c - side / 2.0).collect(),
                    center.iter().map(|c| c + side / 2.0).collect(),
                )
            }
            Shape::Sphere { center, radius } => {
                check_len(center)?;
                if *radius <= 0.0 {
                    return Err(Error::Geometry("sphere radius must be positive".into()));
                }
                (
                    center.iter().map(|c| c - radius).collect(),
                    center.iter().map(|c| c + radius).collect(),
                )
            }
            Shape::Triangle2d { vertices } => {
                if dim != 2 {
                    return Err(Error::Geometry("triangle2d needs a 2D grid".into()));
                }
                let lo = (0..2)
                    .map(|d| vertices.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min))
                    .collect();
                let hi = (0..2)
                    .map(|d| vertices.iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                (lo, hi)
            }
            Shape::CapsuleSail { params } => {
                if dim != 3 {
                    return Err(Error::Geometry("capsule_sail needs a 3D grid".into()));
                }
                let c = params.center;
                let half = params.length / 2.0 + params.radius;
                let sail_half = params.sail[0] / 2.0;
                let lo = vec![
                    c[0] - half.max(sail_half),
                    c[1] - params.radius.max(params.sail[1] / 2.0),
                    c[2] - params.radius,
                ];
                let hi = vec![
                    c[0] + half.max(sail_half),
                    c[1] + params.radius.max(params.sail[1] / 2.0),
                    c[2] + params.radius + params.sail[2],
                ];
                (lo, hi)
            }
            Shape::VoxelFile { .. } => return Ok(None),
        }))
    }

    /// Point-inside test for analytic shapes.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Cube { center, side } => center
                .iter()
                .zip(x)
                .all(|(c, p)| (p - c).abs() <= side / 2.0 + CONTAIN_EPS),
            Shape::Sphere { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, p)| (p - c) * (p - c)).sum();
                d2 <= radius * radius + CONTAIN_EPS
            }
            Shape::Triangle2d { vertices } => point_in_triangle(vertices, [x[0], x[1]]),
            Shape::CapsuleSail { params } => capsule_sail_contains(params, x),
            Shape::VoxelFile { .. } => false,
        }
    }
}

fn point_in_triangle(v: &[[f64; 2]; 3], p: [f64; 2]) -> bool {
    let edge = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let d0 = edge(v[0], v[1]);
    let d1 = edge(v[1], v[2]);
    let d2 = edge(v[2], v[0]);
    let has_neg = d0 < -CONTAIN_EPS || d1 < -CONTAIN_EPS || d2 < -CONTAIN_EPS;
    let has_pos = d0 > CONTAIN_EPS || d1 > CONTAIN_EPS || d2 > CONTAIN_EPS;
    !(has_neg && has_pos)
}

fn capsule_sail_contains(p: &CapsuleSailParams, x: &[f64]) -> bool {
    let c = p.center;
    let half = p.length / 2.0;
    // distance to the hull's axis segment
    let t = (x[0] - c[0]).clamp(-half, half);
    let d2 = (x[0] - c[0] - t).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
    if d2 <= p.radius * p.radius + CONTAIN_EPS {
        return true;
    }
    let base = c[2] + p.radius;
    (x[0] - c[0]).abs() <= p.sail[0] / 2.0 + CONTAIN_EPS
        && (x[1] - c[1]).abs() <= p.sail[1] / 2.0 + CONTAIN_EPS
        && x[2] >= c[2] - CONTAIN_EPS
        && x[2] <= base + p.sail[2] + CONTAIN_EPS
}

/// Nodes covered by the scatterer (homogeneous Dirichlet region).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScattererMask {
    inside: Vec<bool>,
}

impl ScattererMask {
    /// Mask of the non-scattering problem.
    pub fn empty(grid: &StructuredGrid) -> Self {
        Self {
            inside: vec![false; grid.num_nodes()],
        }
    }

    /// Validates that no masked node sits on the domain boundary.
    pub fn from_flags(grid: &StructuredGrid, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "mask of length {} for a grid with {} nodes",
                inside.len(),
                grid.num_nodes()
            )));
        }
        if let Some(idx) = (0..inside.len()).find(|&i| inside[i] && grid.is_boundary(i)) {
            return Err(Error::Geometry(format!(
                "scatterer node {idx} lies on the domain boundary"
            )));
        }
        Ok(Self { inside })
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.inside
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }
}

/// Stair-cased union of `shapes` on `grid`.
pub fn mask_from_shapes(grid: &StructuredGrid, shapes: &[Shape]) -> Result<ScattererMask> {
    let mut inside = vec![false; grid.num_nodes()];
    for shape in shapes {
        match shape {
            Shape::VoxelFile { path } => {
                let voxels = read_voxel_mask(path, grid)?;
                for (slot, v) in inside.iter_mut().zip(voxels.flags()) {
                    *slot |= *v;
                }
            }
            Shape::Cube { center, side } => {
                check_strictly_interior(shape, grid.dim())?;
                mark_cube(grid, center, *side, &mut inside);
            }
            _ => {
                check_strictly_interior(shape, grid.dim())?;
                for (idx, slot) in inside.iter_mut().enumerate() {
                    if !*slot && shape.contains(&grid.coords(idx)[..grid.dim()]) {
                        *slot = true;
                    }
                }
            }
        }
    }
    ScattererMask::from_flags(grid, inside)
}

fn check_strictly_interior(shape: &Shape, dim: usize) -> Result<()> {
    if let Some((lo, hi)) = shape.bounding_box(dim)? {
        if lo.iter().any(|&v| v <= 0.0) || hi.iter().any(|&v| v >= 1.0) {
            return Err(Error::Geometry(format!(
                "shape {shape:?} touches the domain boundary"
            )));
        }
    }
    Ok(())
}

/// Marks the index box covered by an axis-aligned cube.
fn mark_cube(grid: &StructuredGrid, center: &[f64], side: f64, inside: &mut [bool]) {
    let scale = (grid.nodes_per_axis() - 1) as f64;
    let ranges: Vec<(usize, usize)> = center
        .iter()
        .map(|c| {
            let lo = ((c - side / 2.0) * scale - 1e-9).ceil().max(0.0) as usize;
            let hi = ((c + side / 2.0) * scale + 1e-9).floor() as usize;
            (lo, hi)
        })
        .collect();
    for (idx, slot) in inside.iter_mut().enumerate() {
        let ijk = grid.multi_index(idx);
        if ranges
            .iter()
            .enumerate()
            .all(|(d, &(lo, hi))| ijk[d] >= lo && ijk[d] <= hi)
        {
            *slot = true;
        }
    }
}

/// Writes `mask` as a voxel file: magic, `u32` LE node count per axis (x
/// first), then one byte (0/1) per node in grid order.
pub fn write_voxel_mask(path: &Path, grid: &StructuredGrid, mask: &ScattererMask) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 4 * grid.dim() + mask.len());
    bytes.extend_from_slice(VOXEL_MAGIC);
    for _ in 0..grid.dim() {
        bytes.extend_from_slice(&(grid.nodes_per_axis() as u32).to_le_bytes());
    }
    bytes.extend(mask.flags().iter().map(|&b| b as u8));
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads a voxel file for `grid`; the stored resolution must match.
pub fn read_voxel_mask(path: &Path, grid: &StructuredGrid) -> Result<ScattererMask> {
    let bytes = fs::read(path)?;
    parse_voxel_mask(&bytes, grid)
}

pub fn parse_voxel_mask(bytes: &[u8], grid: &StructuredGrid) -> Result<ScattererMask> {
    let d = grid.dim();
    let header = 8 + 4 * d;
    if bytes.len() < header || &bytes[..8] != VOXEL_MAGIC {
        return Err(Error::Format("not a VOXMASK1 file".into()));
    }
    let dims: Vec<usize> = (0..d)
        .map(|k| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize)
        .collect();
    if dims.iter().any(|&n| n != grid.nodes_per_axis()) {
        return Err(Error::Geometry(format!(
            "voxel resolution {dims:?} does not match a grid with {} nodes per axis",
            grid.nodes_per_axis()
        )));
    }
    let body = &bytes[header..];
    if body.len() != grid.num_nodes() {
        return Err(Error::Format(format!(
            "voxel body has {} bytes, expected {}",
            body.len(),
            grid.num_nodes()
        )));
    }
    let mut inside = Vec::with_capacity(body.len());
    for (i, &b) in body.iter().enumerate() {
        match b {
            0 => inside.push(false),
            1 => inside.push(true),
            other => {
                return Err(Error::Format(format!("voxel byte {i} is {other}, expected 0 or 1")))
            }
        }
    }
    ScattererMask::from_flags(grid, inside)
}

/// Interpolation weights along one axis for destination index `j`:
/// `(source index, weight)` pairs, zero weights dropped.
fn axis_weights(src_m: usize, dst_m: usize, j: usize) -> Vec<(usize, f64)> {
    let num = j * (src_m - 1);
    let den = dst_m - 1;
    let mut i0 = num / den;
    let rem = num % den;
    if rem == 0 {
        return vec![(i0, 1.0)];
    }
    if i0 >= src_m - 1 {
        i0 = src_m - 2;
    }
    let t = rem as f64 / den as f64;
    vec![(i0, 1.0 - t), (i0 + 1, t)]
}

/// Tensor-product weights for every destination node.
fn transfer_stencils(src: &StructuredGrid, dst: &StructuredGrid) -> Vec<Vec<(usize, f64)>> {
    let per_axis: Vec<Vec<(usize, f64)>> = (0..dst.nodes_per_axis())
        .map(|j| axis_weights(src.nodes_per_axis(), dst.nodes_per_axis(), j))
        .collect();
    (0..dst.num_nodes())
        .map(|idx| {
            let ijk = dst.multi_index(idx);
            let mut acc: Vec<(usize, f64)> = vec![(0, 1.0)];
            for d in (0..dst.dim()).rev() {
                let w = &per_axis[ijk[d]];
                acc = acc
                    .iter()
                    .flat_map(|&(base, wa)| {
                        w.iter()
                            .map(move |&(i, wb)| (base * src.nodes_per_axis() + i, wa * wb))
                    })
                    .collect();
            }
            acc
        })
        .collect()
}

fn check_field<T>(grid: &StructuredGrid, field: &[T]) -> Result<()> {
    if field.len() != grid.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field of length {} on a grid with {} nodes",
            field.len(),
            grid.num_nodes()
        )));
    }
    Ok(())
}

fn check_same_dim(a: &StructuredGrid, b: &StructuredGrid) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "transfer between {}D and {}D grids",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Multilinear interpolation of `field` (on `src`) at the nodes of `dst`.
pub fn interpolate_field<T>(src: &StructuredGrid, field: &[T], dst: &StructuredGrid) -> Result<Vec<T>>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    check_same_dim(src, dst)?;
    check_field(src, field)?;
    Ok(transfer_stencils(src, dst)
        .into_iter()
        .map(|st| st.iter().fold(T::default(), |acc, &(i, w)| acc + field[i] * w))
        .collect())
}

/// Fine-to-coarse transfer: injection on nested grids (`m_f = 2 m_c - 1`),
/// multilinear interpolation otherwise.
pub fn restrict_field<T>(fine: &StructuredGrid, field: &[T], coarse: &StructuredGrid) -> Result<Vec<T>>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    check_same_dim(fine, coarse)?;
    check_field(fine, field)?;
    if fine.nodes_per_axis() == 2 * coarse.nodes_per_axis() - 1 {
        Ok((0..coarse.num_nodes())
            .map(|idx| {
                let ijk = coarse.multi_index(idx);
                let fine_ijk: Vec<usize> = ijk.iter().map(|&i| 2 * i).collect();
                field[fine.linear_index(&fine_ijk)]
            })
            .collect())
    } else {
        interpolate_field(fine, field, coarse)
    }
}

/// Coarse-to-fine multilinear interpolation.
pub fn prolong_field<T>(coarse: &StructuredGrid, field: &[T], fine: &StructuredGrid) -> Result<Vec<T>>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    interpolate_field(coarse, field, fine)
}

/// Multilinear prolongation as a sparse `fine × coarse` matrix.
pub fn prolongation_matrix(coarse: &StructuredGrid, fine: &StructuredGrid) -> Result<ComplexCsrMatrix> {
    check_same_dim(coarse, fine)?;
    let stencils = transfer_stencils(coarse, fine);
    ComplexCsrMatrix::from_triplets(
        fine.num_nodes(),
        coarse.num_nodes(),
        stencils.into_iter().enumerate().flat_map(|(row, st)| {
            st.into_iter()
                .filter(|&(_, w)| w != 0.0)
                .map(move |(col, w)| (row, col, Complex::new(w, 0.0)))
        }),
    )
}
