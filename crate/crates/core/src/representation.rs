//! Parametric generators with an exact adjoint of their render.
//!
//! `render(view)` produces a flat image vector; `pullback(view, g)` returns
//! `J^T g` where `J` is the Jacobian of that render with respect to the
//! flat parameter vector. Optimizers only ever see the flat parameters.

use crate::error::{check_dim, Error, Result};

/// Image layout: row-major pixels, channels interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Camera analog: an affine re-sampling of the evaluation grid.
///
/// For an affine view, grid point `p` is looked up in the scene at
/// `R(angle) (p - c) + c + translation`, with `c` the grid center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ViewSpec {
    #[default]
    Identity,
    Affine { angle: f64, translation: [f64; 2] },
}

impl ViewSpec {
    /// `n` rotations evenly spaced over the full circle, starting at 0.
    pub fn ring(n: usize) -> Vec<ViewSpec> {
        (0..n)
            .map(|i| ViewSpec::Affine {
                angle: 2.0 * std::f64::consts::PI * i as f64 / n as f64,
                translation: [0.0, 0.0],
            })
            .collect()
    }

    fn map_point(&self, p: [f64; 2], center: [f64; 2]) -> [f64; 2] {
        match *self {
            ViewSpec::Identity => p,
            ViewSpec::Affine { angle, translation } => {
                let (sin, cos) = angle.sin_cos();
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                [
                    cos * dx - sin * dy + center[0] + translation[0],
                    sin * dx + cos * dy + center[1] + translation[1],
                ]
            }
        }
    }
}

/// The identity generator: the image is the parameter vector itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectVector {
    pub params: Vec<f64>,
}

impl DirectVector {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Parameter("direct vector must be non-empty".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter("direct vector entries must be finite".into()));
        }
        Ok(Self { params })
    }
}

/// One isotropic splat. `amplitude` has one entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub center: [f64; 2],
    pub log_scale: f64,
    pub amplitude: Vec<f64>,
}

/// Additive isotropic Gaussian splats on a fixed pixel grid.
///
/// Flat parameter layout per splat: `[cx, cy, log_scale, amp_0 .. amp_{C-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatField2D {
    params: Vec<f64>,
    shape: ImageShape,
}

impl SplatField2D {
    pub fn new(splats: &[Splat], shape: ImageShape) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Parameter("grid must have positive width, height and channels".into()));
        }
        let mut params = Vec::with_capacity(splats.len() * (3 + shape.channels));
        for s in splats {
            check_dim(shape.channels, s.amplitude.len())?;
            params.extend_from_slice(&s.center);
            params.push(s.log_scale);
            params.extend_from_slice(&s.amplitude);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter("splat parameters must be finite".into()));
        }
        Ok(Self { params, shape })
    }

    /// Wraps a flat parameter vector in the per-splat layout above.
    pub fn from_params(params: Vec<f64>, shape: ImageShape) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Parameter("grid must have positive width, height and channels".into()));
        }
        if !params.len().is_multiple_of(3 + shape.channels) {
            return Err(Error::Parameter(format!(
                "{} parameters do not divide into splats of {}",
                params.len(),
                3 + shape.channels
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter("splat parameters must be finite".into()));
        }
        Ok(Self { params, shape })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn stride(&self) -> usize {
        3 + self.shape.channels
    }

    pub fn len(&self) -> usize {
        self.params.len() / self.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn splats(&self) -> Vec<Splat> {
        self.params
            .chunks(self.stride())
            .map(|c| Splat { center: [c[0], c[1]], log_scale: c[2], amplitude: c[3..].to_vec() })
            .collect()
    }

    fn center(&self) -> [f64; 2] {
        [
            (self.shape.width as f64 - 1.0) / 2.0,
            (self.shape.height as f64 - 1.0) / 2.0,
        ]
    }

    /// Visits every (pixel, splat) pair with the pixel's scene-space position.
    fn for_each_sample(&self, view: &ViewSpec, mut f: impl FnMut(usize, usize, &[f64], [f64; 2])) {
        let center = self.center();
        let stride = self.stride();
        for iy in 0..self.shape.height {
            for ix in 0..self.shape.width {
                let pixel = iy * self.shape.width + ix;
                let q = view.map_point([ix as f64, iy as f64], center);
                for (k, splat) in self.params.chunks(stride).enumerate() {
                    f(pixel, k, splat, q);
                }
            }
        }
    }

    pub fn render(&self, view: &ViewSpec) -> Vec<f64> {
        let c = self.shape.channels;
        let mut image = vec![0.0; self.shape.len()];
        self.for_each_sample(view, |pixel, _, splat, q| {
            let g = kernel(splat, q).0;
            for (out, amp) in image[pixel * c..(pixel + 1) * c].iter_mut().zip(&splat[3..]) {
                *out += amp * g;
            }
        });
        image
    }

    pub fn pullback(&self, view: &ViewSpec, image_grad: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.shape.len(), image_grad.len())?;
        let c = self.shape.channels;
        let stride = self.stride();
        let mut grad = vec![0.0; self.params.len()];
        self.for_each_sample(view, |pixel, k, splat, q| {
            let out = &mut grad[k * stride..(k + 1) * stride];
            let v = &image_grad[pixel * c..(pixel + 1) * c];
            let (g, d, inv_var) = kernel(splat, q);
            let mut weighted = 0.0;
            for ch in 0..c {
                out[3 + ch] += v[ch] * g;
                weighted += v[ch] * splat[3 + ch];
            }
            let coeff = weighted * g * inv_var;
            out[0] += coeff * d[0];
            out[1] += coeff * d[1];
            out[2] += coeff * (d[0] * d[0] + d[1] * d[1]);
        });
        Ok(grad)
    }
}

/// Returns `(g, q - center, 1 / scale^2)` with
/// `g = exp(-|q - center|^2 / (2 scale^2))`.
fn kernel(splat: &[f64], q: [f64; 2]) -> (f64, [f64; 2], f64) {
    let d = [q[0] - splat[0], q[1] - splat[1]];
    let inv_var = (-2.0 * splat[2]).exp();
    let g = (-0.5 * (d[0] * d[0] + d[1] * d[1]) * inv_var).exp();
    (g, d, inv_var)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Direct(DirectVector),
    Splat(SplatField2D),
}

impl From<DirectVector> for Representation {
    fn from(v: DirectVector) -> Self {
        Representation::Direct(v)
    }
}

impl From<SplatField2D> for Representation {
    fn from(v: SplatField2D) -> Self {
        Representation::Splat(v)
    }
}

impl Representation {
    pub fn params(&self) -> &[f64] {
        match self {
            Representation::Direct(d) => &d.params,
            Representation::Splat(s) => &s.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Representation::Direct(d) => &mut d.params,
            Representation::Splat(s) => &mut s.params,
        }
    }

    /// Shape of a rendered image. A direct vector is a single-row grayscale strip.
    pub fn image_shape(&self) -> ImageShape {
        match self {
            Representation::Direct(d) => ImageShape { width: d.params.len(), height: 1, channels: 1 },
            Representation::Splat(s) => s.shape,
        }
    }

    pub fn image_dim(&self) -> usize {
        self.image_shape().len()
    }

    fn check_view(&self, view: &ViewSpec) -> Result<()> {
        if let (Representation::Direct(_), ViewSpec::Affine { .. }) = (self, view) {
            return Err(Error::View("direct vectors only support the identity view".into()));
        }
        Ok(())
    }

    pub fn render(&self, view: &ViewSpec) -> Result<Vec<f64>> {
        self.check_view(view)?;
        Ok(match self {
            Representation::Direct(d) => d.params.clone(),
            Representation::Splat(s) => s.render(view),
        })
    }

    /// `J^T image_grad` for the render at `view`.
    pub fn pullback(&self, view: &ViewSpec, image_grad: &[f64]) -> Result<Vec<f64>> {
        self.check_view(view)?;
        match self {
            Representation::Direct(d) => {
                check_dim(d.params.len(), image_grad.len())?;
                Ok(image_grad.to_vec())
            }
            Representation::Splat(s) => s.pullback(view, image_grad),
        }
    }
}

pub fn render(rep: &Representation, view: &ViewSpec) -> Result<Vec<f64>> {
    rep.render(view)
}

pub fn pullback(rep: &Representation, view: &ViewSpec, image_grad: &[f64]) -> Result<Vec<f64>> {
    rep.pullback(view, image_grad)
}
