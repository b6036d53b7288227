//! Forward evaluation of a DeepONet with a strided-CNN branch and an MLP trunk.
//!
//! The branch takes three channels `[k, Re f, Im f]` on an `m_b^d` grid in
//! `[C, (z,) y, x]` layout, applies 3-wide stride-2 convolutions with ReLU,
//! flattens channel-major and runs dense layers (ReLU on hidden layers, linear
//! output of width `2p`). The trunk maps node coordinates `(x, y[, z])` to `p`
//! basis values through dense layers with Leaky ReLU on hidden layers. The
//! complex output is `T·b_re + i·T·b_im`.
//!
//! Tensor names in the weight container:
//! `branch.conv.{i}.weight` `[out, in, 3, 3(, 3)]`, `branch.conv.{i}.bias`,
//! `branch.fc.{i}.weight` `[out, in]`, `branch.fc.{i}.bias`, and likewise
//! `trunk.fc.{i}.*`. Dense layers compute `y = W x + b`; convolutions are
//! cross-correlations.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::AssembledSystem;
use crate::container::{Container, Tensor};
use crate::error::{Error, Result};
use crate::linalg::vector::{norm2, zeros};
use crate::linalg::{Complex, RealMatrix};
use crate::mesh::{restrict_field, StructuredGrid};
use crate::solvers::Preconditioner;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

impl Padding {
    /// Output size and leading pad of a 3-wide stride-2 convolution.
    pub fn output(self, s: usize) -> Result<(usize, usize)> {
        match self {
            Padding::Valid => {
                if s < 3 {
                    return Err(Error::Weights(format!("valid convolution on size {s} < 3")));
                }
                Ok(((s - 3) / 2 + 1, 0))
            }
            Padding::Same => {
                let out = s.div_ceil(2);
                let total = ((out - 1) * 2 + 3).saturating_sub(s);
                Ok((out, total / 2))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widths {
    pub branch: Vec<usize>,
    pub trunk: Vec<usize>,
}

/// Architecture description stored under `meta` in the weight container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepOnetMeta {
    pub dim: usize,
    pub m_b: usize,
    pub p: usize,
    pub channels: Vec<usize>,
    pub widths: Widths,
    pub padding_schedule: Vec<Padding>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

fn default_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

impl DeepOnetMeta {
    /// 2D: 33² input, channels [3, 40, 60, 100, 180], all valid padding.
    pub fn default_2d() -> Self {
        Self {
            dim: 2,
            m_b: 33,
            p: 128,
            channels: vec![3, 40, 60, 100, 180],
            widths: Widths {
                branch: vec![180, 256, 256, 256],
                trunk: vec![2, 256, 256, 128],
            },
            padding_schedule: vec![Padding::Valid; 4],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// 3D: 17³ input, channels [3, 40, 40, 60], same padding on the second layer.
    pub fn default_3d() -> Self {
        Self {
            dim: 3,
            m_b: 17,
            p: 128,
            channels: vec![3, 40, 40, 60],
            widths: Widths {
                branch: vec![60, 256, 256, 256],
                trunk: vec![3, 256, 256, 128],
            },
            padding_schedule: vec![Padding::Valid, Padding::Same, Padding::Valid],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Spatial size before each conv layer and after the last one.
    pub fn spatial_sizes(&self) -> Result<Vec<usize>> {
        let mut sizes = vec![self.m_b];
        for pad in &self.padding_schedule {
            let (out, _) = pad.output(*sizes.last().expect("non-empty"))?;
            sizes.push(out);
        }
        Ok(sizes)
    }

    pub fn flatten_width(&self) -> Result<usize> {
        let s = *self.spatial_sizes()?.last().expect("non-empty");
        Ok(self.channels.last().copied().unwrap_or(0) * s.pow(self.dim as u32))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Weights(msg));
        if !(self.dim == 2 || self.dim == 3) {
            return fail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.channels.first() != Some(&3) {
            return fail(format!("branch must take 3 input channels, got {:?}", self.channels));
        }
        if self.padding_schedule.len() + 1 != self.channels.len() {
            return fail(format!(
                "{} conv layers but {} padding entries",
                self.channels.len() - 1,
                self.padding_schedule.len()
            ));
        }
        let flat = self.flatten_width()?;
        let b = &self.widths.branch;
        if b.len() < 2 || b[0] != flat {
            return fail(format!(
                "branch dense input width {:?} does not match flatten size {flat}",
                b.first()
            ));
        }
        if *b.last().expect("len checked") != 2 * self.p {
            return fail(format!("branch output width must be 2p = {}", 2 * self.p));
        }
        let t = &self.widths.trunk;
        if t.len() < 2 || t[0] != self.dim || *t.last().expect("len checked") != self.p {
            return fail(format!(
                "trunk widths {t:?} must start at dim {} and end at p {}",
                self.dim, self.p
            ));
        }
        if !self.leaky_slope.is_finite() {
            return fail("leaky slope must be finite".into());
        }
        Ok(())
    }

    pub fn branch_grid(&self) -> Result<StructuredGrid> {
        StructuredGrid::new(self.dim, self.m_b)
    }

    fn kernel_volume(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    /// Expected tensor names and shapes.
    fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, w) in self.channels.windows(2).enumerate() {
            let mut shape = vec![w[1], w[0]];
            shape.extend(std::iter::repeat_n(3, self.dim));
            out.push((format!("branch.conv.{i}.weight"), shape));
            out.push((format!("branch.conv.{i}.bias"), vec![w[1]]));
        }
        for (prefix, widths) in [("branch", &self.widths.branch), ("trunk", &self.widths.trunk)] {
            for (i, w) in widths.windows(2).enumerate() {
                out.push((format!("{prefix}.fc.{i}.weight"), vec![w[1], w[0]]));
                out.push((format!("{prefix}.fc.{i}.bias"), vec![w[1]]));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Layer {
    out: usize,
    inp: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn dense(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out)
            .map(|o| {
                let row = &self.weight[o * self.inp..(o + 1) * self.inp];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Loaded network parameters, widened to `f64`.
#[derive(Debug, Clone)]
pub struct DeepOnetWeights {
    meta: DeepOnetMeta,
    conv: Vec<Layer>,
    branch_fc: Vec<Layer>,
    trunk_fc: Vec<Layer>,
}

impl DeepOnetWeights {
    fn build(meta: DeepOnetMeta, mut fetch: impl FnMut(&str, &[usize]) -> Result<Vec<f64>>) -> Result<Self> {
        meta.validate()?;
        let kv = meta.kernel_volume();
        let mut layer = |name: String, out: usize, inp: usize, k: usize| -> Result<Layer> {
            let mut wshape = vec![out, inp];
            if k > 1 {
                wshape.extend(std::iter::repeat_n(3, meta.dim));
            }
            Ok(Layer {
                out,
                inp: inp * k,
                weight: fetch(&format!("{name}.weight"), &wshape)?,
                bias: fetch(&format!("{name}.bias"), &[out])?,
            })
        };
        let conv = meta
            .channels
            .windows(2)
            .enumerate()
            .map(|(i, w)| layer(format!("branch.conv.{i}"), w[1], w[0], kv))
            .collect::<Result<Vec<_>>>()?;
        let branch_fc = meta
            .widths
            .branch
            .windows(2)
            .enumerate()
            .map(|(i, w)| layer(format!("branch.fc.{i}"), w[1], w[0], 1))
            .collect::<Result<Vec<_>>>()?;
        let trunk_fc = meta
            .widths
            .trunk
            .windows(2)
            .enumerate()
            .map(|(i, w)| layer(format!("trunk.fc.{i}"), w[1], w[0], 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            meta,
            conv,
            branch_fc,
            trunk_fc,
        })
    }

    /// All parameters zero.
    pub fn zeros(meta: DeepOnetMeta) -> Result<Self> {
        Self::build(meta, |_, shape| Ok(vec![0.0; shape.iter().product()]))
    }

    /// Uniform `±sqrt(3 / fan_in)` initialization with zero biases.
    pub fn random(meta: DeepOnetMeta, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(meta, |name, shape| {
            let n: usize = shape.iter().product();
            if name.ends_with(".bias") {
                return Ok(vec![0.0; n]);
            }
            let fan_in: usize = shape[1..].iter().product();
            let a = (3.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
            Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
        })
    }

    /// Validates names, shapes and architecture metadata of a container.
    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: DeepOnetMeta = serde_json::from_value(c.meta.clone())
            .map_err(|e| Error::Weights(format!("bad architecture metadata: {e}")))?;
        let expected = meta.layout();
        for name in c.tensors.keys() {
            if !expected.iter().any(|(n, _)| n == name) {
                return Err(Error::Weights(format!("unexpected tensor '{name}'")));
            }
        }
        Self::build(meta, |name, shape| {
            let t = c
                .tensors
                .get(name)
                .ok_or_else(|| Error::Weights(format!("missing tensor '{name}'")))?;
            if t.shape != shape {
                return Err(Error::Weights(format!(
                    "tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            Ok(t.to_f64())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }

    /// Exports in `f32`, the training precision.
    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(serde_json::to_value(&self.meta)?);
        let layout = self.meta.layout();
        let layers = self.conv.iter().chain(&self.branch_fc).chain(&self.trunk_fc);
        for (pair, layer) in layout.chunks(2).zip(layers) {
            let (wname, wshape) = &pair[0];
            let (bname, bshape) = &pair[1];
            c.insert(
                wname.clone(),
                Tensor::f32(wshape.clone(), layer.weight.iter().map(|&v| v as f32).collect())?,
            )?;
            c.insert(
                bname.clone(),
                Tensor::f32(bshape.clone(), layer.bias.iter().map(|&v| v as f32).collect())?,
            )?;
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn meta(&self) -> &DeepOnetMeta {
        &self.meta
    }

    pub fn p(&self) -> usize {
        self.meta.p
    }

    /// Branch output of length `2p` for input channels `[k, re, im]`, each on
    /// the `m_b^d` branch grid.
    pub fn branch_forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let dim = self.meta.dim;
        let m = self.meta.m_b;
        let expect = 3 * m.pow(dim as u32);
        if input.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "branch input of length {}, expected {expect}",
                input.len()
            )));
        }
        let mut x = input.to_vec();
        let mut s = m;
        for (layer, pad) in self.conv.iter().zip(&self.meta.padding_schedule) {
            let (out, lead) = pad.output(s)?;
            x = conv_stride2(layer, &x, dim, s, out, lead);
            s = out;
        }
        let last = self.branch_fc.len() - 1;
        for (i, layer) in self.branch_fc.iter().enumerate() {
            x = layer.dense(&x);
            if i < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x)
    }

    fn trunk_point(&self, point: &[f64]) -> Vec<f64> {
        let slope = self.meta.leaky_slope;
        let last = self.trunk_fc.len() - 1;
        let mut x = point[..self.meta.dim].to_vec();
        for (i, layer) in self.trunk_fc.iter().enumerate() {
            x = layer.dense(&x);
            if i < last {
                x.iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v *= slope
                    }
                });
            }
        }
        x
    }

    /// `T[i, j] = trunk_j(x_i)` for points given as `(x, y, z)`.
    pub fn trunk_eval(&self, points: &[[f64; 3]]) -> RealMatrix {
        let p = self.meta.p;
        let rows: Vec<f64> = points
            .par_iter()
            .flat_map_iter(|pt| self.trunk_point(pt))
            .collect();
        let mut t = RealMatrix::from_row_major(points.len(), p, rows).expect("row lengths are p");
        if points.is_empty() {
            t = RealMatrix::zeros(0, p);
        }
        t
    }

    /// Complex output at `points` for branch inputs on the branch grid.
    pub fn infer(
        &self,
        k: &[f64],
        re: &[f64],
        im: &[f64],
        points: &[[f64; 3]],
    ) -> Result<Vec<Complex>> {
        let b = self.branch_forward(&branch_input(k, re, im)?)?;
        Ok(combine(&self.trunk_eval(points), &b))
    }
}

fn branch_input(k: &[f64], re: &[f64], im: &[f64]) -> Result<Vec<f64>> {
    if k.len() != re.len() || k.len() != im.len() {
        return Err(Error::DimensionMismatch("branch channels differ in length".into()));
    }
    let mut v = Vec::with_capacity(3 * k.len());
    v.extend_from_slice(k);
    v.extend_from_slice(re);
    v.extend_from_slice(im);
    Ok(v)
}

/// `T·b[..p] + i·T·b[p..]`.
pub fn combine(t: &RealMatrix, b: &[f64]) -> Vec<Complex> {
    let p = t.ncols();
    (0..t.nrows())
        .map(|i| {
            let row = t.row(i);
            let re: f64 = row.iter().zip(&b[..p]).map(|(x, y)| x * y).sum();
            let im: f64 = row.iter().zip(&b[p..2 * p]).map(|(x, y)| x * y).sum();
            Complex::new(re, im)
        })
        .collect()
}

/// Stride-2, 3-wide convolution with ReLU, on `[C, (z,) y, x]` data of side `s`.
fn conv_stride2(layer: &Layer, x: &[f64], dim: usize, s: usize, out: usize, lead: usize) -> Vec<f64> {
    let cin = layer.inp / 3usize.pow(dim as u32);
    let (sz, oz, kz) = if dim == 3 { (s, out, 3) } else { (1, 1, 1) };
    let in_plane = sz * s * s;
    let out_plane = oz * out * out;
    let mut y = vec![0.0; layer.out * out_plane];
    y.par_chunks_mut(out_plane).enumerate().for_each(|(o, yo)| {
        for z in 0..oz {
            for r in 0..out {
                for c in 0..out {
                    let mut acc = layer.bias[o];
                    for ci in 0..cin {
                        for dz in 0..kz {
                            let iz = if dim == 3 { (2 * z + dz) as isize - lead as isize } else { 0 };
                            if iz < 0 || iz >= sz as isize {
                                continue;
                            }
                            for dy in 0..3 {
                                let iy = (2 * r + dy) as isize - lead as isize;
                                if iy < 0 || iy >= s as isize {
                                    continue;
                                }
                                for dx in 0..3 {
                                    let ix = (2 * c + dx) as isize - lead as isize;
                                    if ix < 0 || ix >= s as isize {
                                        continue;
                                    }
                                    let w = layer.weight[((o * cin + ci) * kz + dz) * 9 + dy * 3 + dx];
                                    let xi = ci * in_plane
                                        + (iz as usize * s + iy as usize) * s
                                        + ix as usize;
                                    acc += w * x[xi];
                                }
                            }
                        }
                    }
                    yo[(z * out + r) * out + c] = acc.max(0.0);
                }
            }
        }
    });
    y
}

/// Neural-operator correction `e ≈ A⁻¹ r` for the hybrid iteration.
///
/// The residual is scaled to unit norm before inference and the output
/// scaled back, so the map is positively homogeneous but not linear. The
/// trunk is evaluated once at the solver-grid nodes; only the branch inputs
/// are restricted to the branch grid. Corrections on identity rows are zeroed.
pub struct NoPreconditioner {
    weights: Arc<DeepOnetWeights>,
    solver_grid: StructuredGrid,
    branch_grid: StructuredGrid,
    k_branch: Vec<f64>,
    trunk: RealMatrix,
    dirichlet_rows: Vec<usize>,
}

impl NoPreconditioner {
    pub fn new(weights: Arc<DeepOnetWeights>, sys: &AssembledSystem) -> Result<Self> {
        let meta = weights.meta();
        if meta.dim != sys.grid.dim() {
            return Err(Error::Weights(format!(
                "{}D weights used on a {}D problem",
                meta.dim,
                sys.grid.dim()
            )));
        }
        let branch_grid = meta.branch_grid()?;
        let k_branch = restrict_field(&sys.grid, &sys.k_field, &branch_grid)?;
        let points: Vec<[f64; 3]> = (0..sys.grid.num_nodes()).map(|i| sys.grid.coords(i)).collect();
        let trunk = weights.trunk_eval(&points);
        Ok(Self {
            weights,
            solver_grid: sys.grid,
            branch_grid,
            k_branch,
            trunk,
            dirichlet_rows: sys.dirichlet_rows.clone(),
        })
    }

    pub fn trunk(&self) -> &RealMatrix {
        &self.trunk
    }
}

impl Preconditioner for NoPreconditioner {
    fn apply(&self, r: &[Complex]) -> Vec<Complex> {
        let alpha = norm2(r);
        if alpha == 0.0 || !alpha.is_finite() {
            return zeros(r.len());
        }
        let re: Vec<f64> = r.iter().map(|v| v.re / alpha).collect();
        let im: Vec<f64> = r.iter().map(|v| v.im / alpha).collect();
        let re_b = restrict_field(&self.solver_grid, &re, &self.branch_grid).expect("grid sizes fixed");
        let im_b = restrict_field(&self.solver_grid, &im, &self.branch_grid).expect("grid sizes fixed");
        let input = branch_input(&self.k_branch, &re_b, &im_b).expect("equal lengths");
        let b = self.weights.branch_forward(&input).expect("branch grid fixed");
        let mut e = combine(&self.trunk, &b);
        for &i in &self.dirichlet_rows {
            e[i] = Complex::new(0.0, 0.0);
        }
        e.iter_mut().for_each(|v| *v *= alpha);
        e
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "deeponet".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, ProblemSpec};
    use crate::mesh::{mask_from_shapes, Shape};
    use rand::Rng;

    fn small_2d() -> DeepOnetMeta {
        DeepOnetMeta {
            dim: 2,
            m_b: 9,
            p: 3,
            channels: vec![3, 4, 5],
            widths: Widths {
                branch: vec![5 * 4, 7, 6],
                trunk: vec![2, 5, 3],
            },
            padding_schedule: vec![Padding::Valid, Padding::Same],
            leaky_slope: 0.01,
        }
    }

    fn small_3d() -> DeepOnetMeta {
        DeepOnetMeta {
            dim: 3,
            m_b: 9,
            p: 2,
            channels: vec![3, 2, 3],
            widths: Widths {
                branch: vec![3 * 8, 5, 4],
                trunk: vec![3, 4, 2],
            },
            padding_schedule: vec![Padding::Same, Padding::Valid],
            leaky_slope: 0.01,
        }
    }

    fn randomize_biases(w: &mut DeepOnetWeights, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in w.conv.iter_mut().chain(&mut w.branch_fc).chain(&mut w.trunk_fc) {
            l.bias.iter_mut().for_each(|b| *b = rng.random::<f64>() - 0.5);
        }
    }

    /// Reference convolution over an explicitly zero-padded copy of the input.
    fn naive_conv(x: &[f64], cin: usize, s: usize, dim: usize, pad: Padding, l: &Layer) -> (Vec<f64>, usize) {
        let out = match pad {
            Padding::Valid => (s - 3) / 2 + 1,
            Padding::Same => s.div_ceil(2),
        };
        let need = 2 * (out - 1) + 3;
        let before = if need > s { (need - s) / 2 } else { 0 };
        let ps = s + need.saturating_sub(s);
        let zs = if dim == 3 { ps } else { 1 };
        let mut padded = vec![0.0; cin * zs * ps * ps];
        let zin = if dim == 3 { s } else { 1 };
        let zoff = if dim == 3 { before } else { 0 };
        for c in 0..cin {
            for z in 0..zin {
                for y in 0..s {
                    for xx in 0..s {
                        padded[((c * zs + z + zoff) * ps + y + before) * ps + xx + before] =
                            x[((c * zin + z) * s + y) * s + xx];
                    }
                }
            }
        }
        let zo = if dim == 3 { out } else { 1 };
        let kz = if dim == 3 { 3 } else { 1 };
        let mut y = Vec::new();
        for o in 0..l.out {
            for z in 0..zo {
                for r in 0..out {
                    for c in 0..out {
                        let mut acc = l.bias[o];
                        let mut widx = o * cin * kz * 9;
                        for ci in 0..cin {
                            for dz in 0..kz {
                                for dy in 0..3 {
                                    for dx in 0..3 {
                                        acc += l.weight[widx]
                                            * padded[((ci * zs + 2 * z + dz) * ps + 2 * r + dy) * ps + 2 * c + dx];
                                        widx += 1;
                                    }
                                }
                            }
                        }
                        y.push(if acc > 0.0 { acc } else { 0.0 });
                    }
                }
            }
        }
        (y, out)
    }

    fn naive_branch(w: &DeepOnetWeights, input: &[f64]) -> Vec<f64> {
        let meta = w.meta();
        let mut x = input.to_vec();
        let mut s = meta.m_b;
        for (i, l) in w.conv.iter().enumerate() {
            let (y, out) = naive_conv(&x, meta.channels[i], s, meta.dim, meta.padding_schedule[i], l);
            x = y;
            s = out;
        }
        for (i, l) in w.branch_fc.iter().enumerate() {
            let mut y = vec![0.0; l.out];
            for o in 0..l.out {
                y[o] = l.bias[o];
                for j in 0..l.inp {
                    y[o] += l.weight[o * l.inp + j] * x[j];
                }
                if i + 1 < w.branch_fc.len() && y[o] < 0.0 {
                    y[o] = 0.0;
                }
            }
            x = y;
        }
        x
    }

    fn random_input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn default_architectures_size_chain() {
        let m2 = DeepOnetMeta::default_2d();
        assert_eq!(m2.spatial_sizes().unwrap(), vec![33, 16, 7, 3, 1]);
        assert_eq!(m2.flatten_width().unwrap(), 180);
        m2.validate().unwrap();
        let m3 = DeepOnetMeta::default_3d();
        assert_eq!(m3.spatial_sizes().unwrap(), vec![17, 8, 4, 1]);
        assert_eq!(m3.flatten_width().unwrap(), 60);
        m3.validate().unwrap();
        assert_eq!(Padding::Same.output(8).unwrap(), (4, 0));
        assert_eq!(Padding::Same.output(7).unwrap(), (4, 1));
        let mut bad = DeepOnetMeta::default_3d();
        bad.widths.branch[0] = 1620;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let w = DeepOnetWeights::zeros(small_2d()).unwrap();
        let out = w.branch_forward(&random_input(3 * 81, 1)).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        let t = w.trunk_eval(&[[0.0; 3]]);
        assert!(t.row(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn branch_matches_naive_oracle() {
        for (meta, seed) in [(small_2d(), 3), (small_3d(), 4)] {
            let mut w = DeepOnetWeights::random(meta.clone(), seed).unwrap();
            randomize_biases(&mut w, seed + 10);
            let input = random_input(3 * meta.m_b.pow(meta.dim as u32), seed + 20);
            let fast = w.branch_forward(&input).unwrap();
            let slow = naive_branch(&w, &input);
            assert_eq!(fast.len(), 2 * meta.p);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn trunk_matches_manual_mlp() {
        let mut w = DeepOnetWeights::random(small_2d(), 5).unwrap();
        randomize_biases(&mut w, 6);
        let pt = [0.3, 0.7, 0.0];
        let t = w.trunk_eval(&[pt]);
        let (l0, l1) = (&w.trunk_fc[0], &w.trunk_fc[1]);
        let mut h = [0.0; 5];
        for o in 0..5 {
            let v = l0.bias[o] + l0.weight[o * 2] * 0.3 + l0.weight[o * 2 + 1] * 0.7;
            h[o] = if v >= 0.0 { v } else { 0.01 * v };
        }
        for o in 0..3 {
            let v: f64 = l1.bias[o] + (0..5).map(|j| l1.weight[o * 5 + j] * h[j]).sum::<f64>();
            assert!((t[(0, o)] - v).abs() < 1e-14);
        }
    }

    #[test]
    fn inference_factorizes_through_trunk() {
        let mut w = DeepOnetWeights::random(small_2d(), 7).unwrap();
        randomize_biases(&mut w, 8);
        let n = 81;
        let k = vec![6.0; n];
        let re = random_input(n, 9);
        let im = random_input(n, 10);
        let pts_a = [[0.1, 0.2, 0.0], [0.5, 0.5, 0.0], [0.9, 0.3, 0.0]];
        let pts_b = [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0]];
        let ua = w.infer(&k, &re, &im, &pts_a).unwrap();
        let ub = w.infer(&k, &re, &im, &pts_b).unwrap();
        assert_eq!(ua[1], ub[0]);
        let b = w.branch_forward(&branch_input(&k, &re, &im).unwrap()).unwrap();
        let t = w.trunk_eval(&pts_a);
        for i in 0..3 {
            let mut acc = Complex::new(0.0, 0.0);
            for j in 0..3 {
                acc += Complex::new(t[(i, j)] * b[j], t[(i, j)] * b[3 + j]);
            }
            assert!((acc - ua[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn container_round_trip_and_validation() {
        let w = DeepOnetWeights::random(small_2d(), 11).unwrap();
        let c = w.to_container().unwrap();
        let back = DeepOnetWeights::from_container(&c).unwrap();
        // f32 export is the stored precision
        let c2 = back.to_container().unwrap();
        assert_eq!(c.to_bytes().unwrap(), c2.to_bytes().unwrap());

        let mut missing = c.clone();
        missing.tensors.remove("trunk.fc.1.bias");
        let err = DeepOnetWeights::from_container(&missing).unwrap_err();
        assert!(err.to_string().contains("trunk.fc.1.bias"), "{err}");

        let mut reshaped = c.clone();
        reshaped.tensors.insert(
            "branch.fc.0.weight".into(),
            Tensor::f32(vec![20, 7], vec![0.0; 140]).unwrap(),
        );
        assert!(DeepOnetWeights::from_container(&reshaped).is_err());

        let mut bad_meta = c;
        bad_meta.meta["p"] = serde_json::json!(4);
        assert!(DeepOnetWeights::from_container(&bad_meta).is_err());
    }

    #[test]
    fn default_2d_dense_input_width() {
        let w = DeepOnetWeights::zeros(DeepOnetMeta::default_2d()).unwrap();
        let c = w.to_container().unwrap();
        assert_eq!(c.get("branch.fc.0.weight").unwrap().shape, vec![256, 180]);
        assert_eq!(c.get("branch.conv.0.weight").unwrap().shape, vec![40, 3, 3, 3]);
    }

    #[test]
    fn no_preconditioner_contract() {
        let grid = StructuredGrid::new(2, 17).unwrap();
        let mask = mask_from_shapes(
            &grid,
            &[Shape::Cube {
                center: vec![0.5, 0.5],
                side: 0.25,
            }],
        )
        .unwrap();
        let n = grid.num_nodes();
        let spec = ProblemSpec::scattering(grid, vec![6.0; n], vec![1.0; 17], mask);
        let sys = assemble(&spec).unwrap();
        let mut w = DeepOnetWeights::random(small_2d(), 12).unwrap();
        randomize_biases(&mut w, 13);
        let m = NoPreconditioner::new(Arc::new(w), &sys).unwrap();
        assert!(!m.is_linear());
        assert!(m.apply(&zeros(n)).iter().all(|v| v.norm() == 0.0));
        let r: Vec<Complex> = random_input(n, 14)
            .iter()
            .zip(random_input(n, 15))
            .map(|(a, b)| Complex::new(*a, b))
            .collect();
        let e = m.apply(&r);
        assert!(e.iter().any(|v| v.norm() > 0.0));
        for &i in &sys.dirichlet_rows {
            assert_eq!(e[i], Complex::new(0.0, 0.0));
        }
        let scaled: Vec<Complex> = r.iter().map(|v| v * 3.5).collect();
        let e2 = m.apply(&scaled);
        for (a, b) in e.iter().zip(&e2) {
            assert!((a * 3.5 - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
        let wrong = DeepOnetWeights::zeros(small_3d()).unwrap();
        assert!(NoPreconditioner::new(Arc::new(wrong), &sys).is_err());
    }
}
