//! Finite-difference discretization of
//!
//! ```text
//!   Δu + k(x)² u = f          in Ω = [0,1]^d
//!   ∂u/∂n − i k u = 0         on absorbing faces
//!   ∂u/∂n = g                 on the incoming-wave face
//!   u = 0                     on the scatterer
//! ```
//!
//! Boundary faces use second-order ghost-node elimination: the ghost value
//! `u_g = u_in + 2h ∂u/∂n` is substituted into the standard stencil.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::ZERO;
use crate::linalg::{Complex, ComplexCsrMatrix};
use crate::mesh::{BoundaryClassification, Face, ScattererMask, StructuredGrid};

/// Condition imposed on one boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCondition {
    /// First-order Sommerfeld condition `∂u/∂n − i k u = 0`.
    Absorbing,
    /// Neumann condition `∂u/∂n = g` with the incoming wave `g`.
    Incoming,
    /// Prescribed values from `ProblemSpec::dirichlet_values` (zero if unset).
    Dirichlet,
}

/// How Robin/Neumann faces are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryScheme {
    /// Centered ghost-node elimination (second order).
    #[default]
    GhostNode,
    /// One-sided first-order difference replacing the boundary row.
    OneSided,
}

/// Face conditions, indexed by [`Face`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub left: FaceCondition,
    pub right: FaceCondition,
    pub front: FaceCondition,
    pub back: FaceCondition,
    pub bottom: FaceCondition,
    pub top: FaceCondition,
}

impl BoundaryConditions {
    /// Incoming wave on top, absorbing everywhere else.
    pub const SCATTERING: Self = Self {
        left: FaceCondition::Absorbing,
        right: FaceCondition::Absorbing,
        front: FaceCondition::Absorbing,
        back: FaceCondition::Absorbing,
        bottom: FaceCondition::Absorbing,
        top: FaceCondition::Incoming,
    };

    pub const ALL_DIRICHLET: Self = Self {
        left: FaceCondition::Dirichlet,
        right: FaceCondition::Dirichlet,
        front: FaceCondition::Dirichlet,
        back: FaceCondition::Dirichlet,
        bottom: FaceCondition::Dirichlet,
        top: FaceCondition::Dirichlet,
    };

    pub fn get(&self, face: Face) -> FaceCondition {
        match face {
            Face::Left => self.left,
            Face::Right => self.right,
            Face::Front => self.front,
            Face::Back => self.back,
            Face::Bottom => self.bottom,
            Face::Top => self.top,
        }
    }

    pub fn set(&mut self, face: Face, cond: FaceCondition) {
        let slot = match face {
            Face::Left => &mut self.left,
            Face::Right => &mut self.right,
            Face::Front => &mut self.front,
            Face::Back => &mut self.back,
            Face::Bottom => &mut self.bottom,
            Face::Top => &mut self.top,
        };
        *slot = cond;
    }
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::SCATTERING
    }
}

/// Everything needed to assemble one Helmholtz system.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: StructuredGrid,
    /// Wave number per node.
    pub k_field: Vec<f64>,
    /// Forcing per node.
    pub f_field: Vec<Complex>,
    /// Incoming wave on a boundary face, indexed by the face grid
    /// (`StructuredGrid::face_index`). Length `m^(d-1)`.
    pub g_field: Vec<f64>,
    pub mask: ScattererMask,
    pub boundary: BoundaryConditions,
    pub scheme: BoundaryScheme,
    /// Values for Dirichlet faces (full grid); zero when `None`.
    pub dirichlet_values: Option<Vec<Complex>>,
}

impl ProblemSpec {
    /// Scattering problem with zero forcing.
    pub fn scattering(
        grid: StructuredGrid,
        k_field: Vec<f64>,
        g_field: Vec<f64>,
        mask: ScattererMask,
    ) -> Self {
        let n = grid.num_nodes();
        Self {
            grid,
            k_field,
            f_field: vec![ZERO; n],
            g_field,
            mask,
            boundary: BoundaryConditions::SCATTERING,
            scheme: BoundaryScheme::GhostNode,
            dirichlet_values: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.num_nodes();
        let face_nodes = n / self.grid.nodes_per_axis();
        let check = |what: &str, len: usize, want: usize| {
            if len != want {
                Err(Error::DimensionMismatch(format!(
                    "{what} has length {len}, expected {want}"
                )))
            } else {
                Ok(())
            }
        };
        check("k_field", self.k_field.len(), n)?;
        check("f_field", self.f_field.len(), n)?;
        check("mask", self.mask.len(), n)?;
        check("g_field", self.g_field.len(), face_nodes)?;
        if let Some(v) = &self.dirichlet_values {
            check("dirichlet_values", v.len(), n)?;
        }
        if let Some(i) = self.k_field.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "wave number must be positive and finite, node {i} has {}",
                self.k_field[i]
            )));
        }
        Ok(())
    }
}

/// Assembled `A u = rhs`, plus what preconditioners need from the problem.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: ComplexCsrMatrix,
    pub rhs: Vec<Complex>,
    /// Identity rows: scatterer nodes and nodes on Dirichlet faces.
    pub dirichlet_rows: Vec<usize>,
    pub grid: StructuredGrid,
    pub k_field: Vec<f64>,
}

impl AssembledSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// `rhs − A u`.
    pub fn residual(&self, u: &[Complex]) -> Result<Vec<Complex>> {
        self.matrix.residual(&self.rhs, u)
    }
}

/// Discretizes `spec` into a sparse system.
pub fn assemble(spec: &ProblemSpec) -> Result<AssembledSystem> {
    spec.validate()?;
    let grid = &spec.grid;
    let dim = grid.dim();
    let m = grid.nodes_per_axis();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let n = grid.num_nodes();
    let labels = BoundaryClassification::new(grid);
    let one = Complex::new(1.0, 0.0);

    let mut triplets = Vec::with_capacity(n * (2 * dim + 1));
    let mut rhs = vec![ZERO; n];
    let mut dirichlet_rows = Vec::new();

    for idx in 0..n {
        let faces = labels.faces(idx);
        let on_dirichlet_face = faces
            .iter()
            .any(|&f| spec.boundary.get(f) == FaceCondition::Dirichlet);
        if spec.mask.contains(idx) || on_dirichlet_face {
            triplets.push((idx, idx, one));
            rhs[idx] = if spec.mask.contains(idx) {
                ZERO
            } else {
                spec.dirichlet_values.as_ref().map_or(ZERO, |v| v[idx])
            };
            dirichlet_rows.push(idx);
            continue;
        }

        let k = spec.k_field[idx];
        let ijk = grid.multi_index(idx);
        rhs[idx] = spec.f_field[idx];

        if spec.scheme == BoundaryScheme::OneSided && !faces.is_empty() {
            // Each face contributes (u_b − u_in)/h² [− i k u_b / h] = [g/h].
            rhs[idx] = ZERO;
            for &face in &faces {
                let (axis, high) = face.axis_side(dim).expect("label matches grid");
                let stride = grid.stride(axis);
                let inner = if high { idx - stride } else { idx + stride };
                triplets.push((idx, idx, Complex::new(inv_h2, 0.0)));
                triplets.push((idx, inner, Complex::new(-inv_h2, 0.0)));
                match spec.boundary.get(face) {
                    FaceCondition::Absorbing => {
                        triplets.push((idx, idx, Complex::new(0.0, -k / h)));
                    }
                    FaceCondition::Incoming => {
                        let g = spec.g_field[grid.face_index(idx, axis)];
                        rhs[idx] += Complex::new(g / h, 0.0);
                    }
                    FaceCondition::Dirichlet => unreachable!("handled above"),
                }
            }
            continue;
        }

        let mut diag = Complex::new(k * k - 2.0 * dim as f64 * inv_h2, 0.0);
        for axis in 0..dim {
            let stride = grid.stride(axis);
            let i = ijk[axis];
            let lower = i > 0;
            let upper = i + 1 < m;
            if lower {
                triplets.push((idx, idx - stride, Complex::new(inv_h2, 0.0)));
            }
            if upper {
                triplets.push((idx, idx + stride, Complex::new(inv_h2, 0.0)));
            }
            for (high, present) in [(false, lower), (true, upper)] {
                if present {
                    continue;
                }
                // ghost node beyond the face mirrors the interior neighbour
                let inner = if high { idx - stride } else { idx + stride };
                triplets.push((idx, inner, Complex::new(inv_h2, 0.0)));
                let face = Face::of(dim, axis, high);
                match spec.boundary.get(face) {
                    FaceCondition::Absorbing => {
                        diag += Complex::new(0.0, 2.0 * k / h);
                    }
                    FaceCondition::Incoming => {
                        let g = spec.g_field[grid.face_index(idx, axis)];
                        rhs[idx] -= Complex::new(2.0 * g / h, 0.0);
                    }
                    FaceCondition::Dirichlet => unreachable!("handled above"),
                }
            }
        }
        triplets.push((idx, idx, diag));
    }

    let matrix = ComplexCsrMatrix::from_triplets(n, n, triplets)?;
    Ok(AssembledSystem {
        matrix,
        rhs,
        dirichlet_rows,
        grid: *grid,
        k_field: spec.k_field.clone(),
    })
}

/// `rhs − A u`.
pub fn residual(sys: &AssembledSystem, u: &[Complex]) -> Result<Vec<Complex>> {
    sys.residual(u)
}

/// Manufactured problem with exact solution `u*(x) = Π_d sin(π x_d)` and
/// Dirichlet data on every face; `f = Δu* + k² u* = (k² − d π²) u*`.
pub fn manufactured_problem(grid: StructuredGrid, k_const: f64) -> (ProblemSpec, Vec<Complex>) {
    use std::f64::consts::PI;
    let n = grid.num_nodes();
    let dim = grid.dim();
    let exact: Vec<Complex> = (0..n)
        .map(|i| {
            let x = grid.coords(i);
            Complex::new((0..dim).map(|d| (PI * x[d]).sin()).product(), 0.0)
        })
        .collect();
    let factor = k_const * k_const - dim as f64 * PI * PI;
    let f_field = exact.iter().map(|u| u * factor).collect();
    // k only enters interior rows; a tiny positive value stands in for k = 0
    let k_value = if k_const > 0.0 { k_const } else { f64::MIN_POSITIVE };
    let spec = ProblemSpec {
        grid,
        k_field: vec![k_value; n],
        f_field,
        g_field: vec![0.0; n / grid.nodes_per_axis()],
        mask: ScattererMask::empty(&grid),
        boundary: BoundaryConditions::ALL_DIRICHLET,
        scheme: BoundaryScheme::GhostNode,
        dirichlet_values: Some(exact.clone()),
    };
    (spec, exact)
}
