//! Toy renderer for analytic signed-distance scenes.
//!
//! Diffuse point-light shading, a white-albedo ("textureless") variant, the
//! radial density-blob bias and a sphere tracer driven by cameras placed on a
//! sphere around the origin (z is up, polar angle measured from +z).

use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::LatentGrid;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    /// Componentwise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn in_unit_cube(self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Rotation about the z axis.
    pub fn rotate_z(self, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    pub color: Vec3,
    pub ambient: Vec3,
}

impl PointLight {
    pub fn new(position: Vec3, color: Vec3, ambient: Vec3) -> Result<Self> {
        if !color.in_unit_cube() || !ambient.in_unit_cube() {
            return Err(Error::InvalidParameter(
                "light color and ambient components must lie in [0, 1]".into(),
            ));
        }
        Ok(PointLight {
            position,
            color,
            ambient,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub albedo: Vec3,
}

impl SurfaceSample {
    pub fn new(position: Vec3, normal: Vec3, albedo: Vec3) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "normal must be unit length, has norm {}",
                normal.norm()
            )));
        }
        if !albedo.in_unit_cube() {
            return Err(Error::InvalidParameter(
                "albedo components must lie in [0, 1]".into(),
            ));
        }
        Ok(SurfaceSample {
            position,
            normal,
            albedo,
        })
    }
}

/// `c = albedo * (light_color * max(0, n . (l - p) / |l - p|) + ambient)`,
/// clamped to `[0, 1]` per channel.
pub fn shade(sample: &SurfaceSample, light: &PointLight) -> Result<Vec3> {
    let to_light = light.position - sample.position;
    let dist = to_light.norm();
    if dist == 0.0 {
        return Err(Error::DegenerateLight);
    }
    let cosine = (sample.normal.dot(to_light) / dist).max(0.0);
    let c = sample.albedo.hadamard(light.color * cosine + light.ambient);
    Ok(c.map(|v| v.clamp(0.0, 1.0)))
}

pub fn shade_textureless(sample: &SurfaceSample, light: &PointLight) -> Result<Vec3> {
    shade(
        &SurfaceSample {
            albedo: Vec3::ONE,
            ..*sample
        },
        light,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    pub lambda_tau: f64,
    pub radius: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            lambda_tau: 1.0,
            radius: 0.0,
        }
    }
}

/// `lambda_tau * (|p| - r)^2`, added to predicted SDF values to bias content
/// toward the origin.
pub fn density_blob_bias(mu_norm: f64, params: &BlobParams) -> f64 {
    let d = mu_norm - params.radius;
    params.lambda_tau * (d * d)
}

pub trait Sdf: Sync {
    fn distance(&self, p: Vec3) -> f64;

    fn albedo(&self, _p: Vec3) -> Vec3 {
        Vec3::splat(0.8)
    }

    /// Upper bound on `|grad distance|`.
    fn lipschitz(&self) -> f64 {
        1.0
    }

    /// Signed distance the tracer may advance from `p`, where `d = distance(p)`,
    /// without crossing the zero set.
    fn safe_step(&self, _p: Vec3, d: f64) -> f64 {
        d / self.lipschitz().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSdf {
    pub center: Vec3,
    pub radius: f64,
    pub albedo: Vec3,
}

impl SphereSdf {
    pub fn unit() -> Self {
        SphereSdf {
            center: Vec3::ZERO,
            radius: 1.0,
            albedo: Vec3::new(0.9, 0.55, 0.3),
        }
    }
}

impl Sdf for SphereSdf {
    fn distance(&self, p: Vec3) -> f64 {
        (p - self.center).norm() - self.radius
    }

    fn albedo(&self, _p: Vec3) -> Vec3 {
        self.albedo
    }
}

/// Field with no surface.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptySdf;

impl Sdf for EmptySdf {
    fn distance(&self, _p: Vec3) -> f64 {
        1.0
    }
}

/// `inner(p) + density_blob_bias(|p|)`. The bias is quadratic and has no global
/// Lipschitz bound, so steps come from a local bound instead.
#[derive(Debug, Clone, Copy)]
pub struct BlobBiasedSdf<S> {
    pub inner: S,
    pub params: BlobParams,
}

impl<S: Sdf> Sdf for BlobBiasedSdf<S> {
    fn distance(&self, p: Vec3) -> f64 {
        self.inner.distance(p) + density_blob_bias(p.norm(), &self.params)
    }

    fn albedo(&self, p: Vec3) -> Vec3 {
        self.inner.albedo(p)
    }

    fn lipschitz(&self) -> f64 {
        f64::INFINITY
    }

    /// Over a step of length `s`, the field changes by at most
    /// `(L + 2 lambda |r - r0|) s + lambda s^2`; solve that for `|d|`.
    fn safe_step(&self, p: Vec3, d: f64) -> f64 {
        let lambda = self.params.lambda_tau;
        let b = self.inner.lipschitz() + 2.0 * lambda * (p.norm() - self.params.radius).abs();
        let s = if lambda > 0.0 {
            2.0 * d.abs() / (b + (b * b + 4.0 * lambda * d.abs()).sqrt())
        } else {
            d.abs() / b.max(1.0)
        };
        s.copysign(d)
    }
}

/// Uniform constant field; with a blob bias its zero set is a sphere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl Sdf for ConstantField {
    fn distance(&self, _p: Vec3) -> f64 {
        self.0
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub radius: f64,
    /// Polar angle from +z, in `(0, pi)`.
    pub polar: f64,
    /// Azimuth in `[0, 2 pi)`.
    pub azimuth: f64,
    /// Vertical field of view in radians.
    pub fov: f64,
}

impl CameraPose {
    pub fn new(radius: f64, polar: f64, azimuth: f64, fov: f64) -> Result<Self> {
        use std::f64::consts::{PI, TAU};
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "camera radius {radius} must be positive"
            )));
        }
        if !(polar > 0.0 && polar < PI) {
            return Err(Error::InvalidParameter(format!(
                "polar angle {polar} outside (0, pi)"
            )));
        }
        if !(0.0..TAU).contains(&azimuth) {
            return Err(Error::InvalidParameter(format!(
                "azimuth {azimuth} outside [0, 2 pi)"
            )));
        }
        if !(fov > 0.0 && fov < PI) {
            return Err(Error::InvalidParameter(format!(
                "field of view {fov} outside (0, pi)"
            )));
        }
        Ok(CameraPose {
            radius,
            polar,
            azimuth,
            fov,
        })
    }

    pub fn position(&self) -> Vec3 {
        let (st, ct) = self.polar.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        Vec3::new(st * cp, st * sp, ct) * self.radius
    }

    /// `(right, up, forward)`; forward points at the origin.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (-self.position()).normalized();
        let right = forward.cross(Vec3::new(0.0, 0.0, 1.0)).normalized();
        let up = right.cross(forward);
        (right, up, forward)
    }

    /// Unit ray direction through the center of pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize, resolution: usize) -> Vec3 {
        let (right, up, forward) = self.basis();
        let half = (self.fov / 2.0).tan();
        let res = resolution as f64;
        let x = (2.0 * (col as f64 + 0.5) / res - 1.0) * half;
        let y = (1.0 - 2.0 * (row as f64 + 0.5) / res) * half;
        (forward + right * x + up * y).normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShadingMode {
    Shaded,
    Textureless,
    /// Camera-space normal encoded as `(n + 1) / 2`.
    Normal,
}

impl ShadingMode {
    pub fn name(self) -> &'static str {
        match self {
            ShadingMode::Shaded => "shaded",
            ShadingMode::Textureless => "textureless",
            ShadingMode::Normal => "normal",
        }
    }
}

/// Picks textureless with probability `textureless_ratio`, shaded otherwise.
pub fn sample_shading_mode(rng: &mut SplitMix64, textureless_ratio: f64) -> ShadingMode {
    if rng.next_f64() < textureless_ratio {
        ShadingMode::Textureless
    } else {
        ShadingMode::Shaded
    }
}

pub const MAX_TRACE_STEPS: usize = 128;
pub const SURFACE_TOLERANCE: f64 = 1e-4;
const NORMAL_STEP: f64 = 1e-6;
const MAX_REFINE_STEPS: usize = 4;
const MAX_REFINE_SHIFT: f64 = 0.1;

pub fn sdf_normal(sdf: &dyn Sdf, p: Vec3) -> Vec3 {
    let h = NORMAL_STEP;
    let dx = Vec3::new(h, 0.0, 0.0);
    let dy = Vec3::new(0.0, h, 0.0);
    let dz = Vec3::new(0.0, 0.0, h);
    Vec3::new(
        sdf.distance(p + dx) - sdf.distance(p - dx),
        sdf.distance(p + dy) - sdf.distance(p - dy),
        sdf.distance(p + dz) - sdf.distance(p - dz),
    )
    .normalized()
}

/// Sphere-traces a ray; returns the hit distance along `dir`.
///
/// A hit within tolerance is polished with a few Newton steps along the ray
/// so that normals are accurate well below the tracing tolerance.
pub fn trace_ray(sdf: &dyn Sdf, origin: Vec3, dir: Vec3, far: f64) -> Option<f64> {
    let mut t = 0.0;
    for _ in 0..MAX_TRACE_STEPS {
        let p = origin + dir * t;
        let d = sdf.distance(p);
        if d.abs() < SURFACE_TOLERANCE {
            return Some(refine_hit(sdf, origin, dir, t));
        }
        t += sdf.safe_step(p, d);
        if t > far || t < 0.0 {
            return None;
        }
    }
    None
}

fn refine_hit(sdf: &dyn Sdf, origin: Vec3, dir: Vec3, mut t: f64) -> f64 {
    let mut f = sdf.distance(origin + dir * t);
    for _ in 0..MAX_REFINE_STEPS {
        if f == 0.0 {
            break;
        }
        let p = origin + dir * t;
        let h = NORMAL_STEP;
        let slope = (sdf.distance(p + dir * h) - sdf.distance(p - dir * h)) / (2.0 * h);
        if slope.abs() < 1e-3 {
            break;
        }
        let dt = f / slope;
        if dt.abs() > MAX_REFINE_SHIFT {
            break;
        }
        // Only keep steps that move closer to the surface.
        let f_next = sdf.distance(origin + dir * (t - dt));
        if f_next.abs() >= f.abs() {
            break;
        }
        t -= dt;
        f = f_next;
    }
    t
}

/// Renders a `resolution x resolution x 3` image with values in `[0, 1]`.
/// Misses are black.
pub fn render_sdf(
    sdf: &dyn Sdf,
    camera: &CameraPose,
    light: &PointLight,
    mode: ShadingMode,
    resolution: usize,
) -> Result<LatentGrid> {
    if resolution == 0 || resolution > 256 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} outside [1, 256]"
        )));
    }
    let origin = camera.position();
    let (right, up, forward) = camera.basis();
    let far = 2.0 * camera.radius + 10.0;

    let rows: Vec<Vec<f64>> = (0..resolution)
        .into_par_iter()
        .map(|row| {
            let mut pixels = Vec::with_capacity(resolution * 3);
            for col in 0..resolution {
                let dir = camera.ray(row, col, resolution);
                let color = match trace_ray(sdf, origin, dir, far) {
                    None => Vec3::ZERO,
                    Some(t) => {
                        let p = origin + dir * t;
                        let n = sdf_normal(sdf, p);
                        let albedo = sdf.albedo(p).map(|v| v.clamp(0.0, 1.0));
                        let sample = SurfaceSample {
                            position: p,
                            normal: n,
                            albedo,
                        };
                        let unlit = albedo.hadamard(light.ambient);
                        match mode {
                            ShadingMode::Shaded => shade(&sample, light).unwrap_or(unlit),
                            ShadingMode::Textureless => {
                                shade_textureless(&sample, light).unwrap_or(light.ambient)
                            }
                            ShadingMode::Normal => {
                                let cam = Vec3::new(n.dot(right), n.dot(up), -n.dot(forward));
                                cam.map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
                            }
                        }
                    }
                };
                pixels.extend_from_slice(&color.to_array());
            }
            pixels
        })
        .collect();

    LatentGrid::from_vec(resolution, resolution, 3, rows.concat())
}

/// Expected hit-pixel count of a sphere centered on the optical axis: the
/// silhouette is a disc of radius `tan(asin(R / D))` on the unit image plane.
pub fn analytic_sphere_area(sphere_radius: f64, camera: &CameraPose, resolution: usize) -> f64 {
    let half_angle = (sphere_radius / camera.radius).asin();
    let disc = half_angle.tan();
    let pixel = 2.0 * (camera.fov / 2.0).tan() / resolution as f64;
    std::f64::consts::PI * disc * disc / (pixel * pixel)
}

/// Number of pixels with any non-zero channel.
pub fn silhouette_pixels(image: &LatentGrid) -> usize {
    image
        .as_slice()
        .chunks_exact(image.channels())
        .filter(|px| px.iter().any(|v| *v > 0.0))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn light(pos: Vec3, color: Vec3, ambient: Vec3) -> PointLight {
        PointLight::new(pos, color, ambient).unwrap()
    }

    #[test]
    fn light_behind_surface_leaves_ambient() {
        let s = SurfaceSample::new(
            Vec3::ZERO,
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.5, 0.6, 0.7),
        )
        .unwrap();
        let l = light(
            Vec3::new(0.0, 0.0, -3.0),
            Vec3::ONE,
            Vec3::new(0.2, 0.1, 0.4),
        );
        let c = shade(&s, &l).unwrap();
        assert_eq!(c, Vec3::new(0.5 * 0.2, 0.6 * 0.1, 0.7 * 0.4));
    }

    #[test]
    fn aligned_light_gives_full_intensity() {
        let s = SurfaceSample::new(Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0), Vec3::ONE).unwrap();
        let l = light(Vec3::new(0.0, 5.0, 0.0), Vec3::ONE, Vec3::ZERO);
        assert_eq!(shade(&s, &l).unwrap(), Vec3::ONE);
    }

    #[test]
    fn sixty_degrees_halves_diffuse() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let l_dir = Vec3::new((60f64).to_radians().sin(), 0.0, (60f64).to_radians().cos());
        let s = SurfaceSample::new(Vec3::ZERO, n, Vec3::new(1.0, 0.5, 0.25)).unwrap();
        let c = shade(&s, &light(l_dir * 2.0, Vec3::ONE, Vec3::ZERO)).unwrap();
        let want = [0.5, 0.25, 0.125];
        for (got, want) in c.to_array().iter().zip(want) {
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn coincident_light_rejected() {
        let s = SurfaceSample::new(Vec3::ONE, Vec3::new(1.0, 0.0, 0.0), Vec3::ONE).unwrap();
        assert!(matches!(
            shade(&s, &light(Vec3::ONE, Vec3::ONE, Vec3::ZERO)),
            Err(Error::DegenerateLight)
        ));
    }

    #[test]
    fn textureless_ignores_albedo() {
        let l = light(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(0.9, 0.8, 0.7),
            Vec3::splat(0.05),
        );
        let n = Vec3::new(1.0, 1.0, 1.0).normalized();
        let a = SurfaceSample::new(Vec3::ZERO, n, Vec3::new(0.1, 0.2, 0.3)).unwrap();
        let b = SurfaceSample::new(Vec3::ZERO, n, Vec3::new(0.9, 0.0, 0.4)).unwrap();
        let white = SurfaceSample::new(Vec3::ZERO, n, Vec3::ONE).unwrap();
        assert_eq!(
            shade_textureless(&a, &l).unwrap(),
            shade_textureless(&b, &l).unwrap()
        );
        assert_eq!(
            shade_textureless(&a, &l).unwrap(),
            shade(&white, &l).unwrap()
        );
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(PointLight::new(Vec3::ZERO, Vec3::splat(1.5), Vec3::ZERO).is_err());
        assert!(SurfaceSample::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0), Vec3::ONE).is_err());
        assert!(CameraPose::new(3.0, 0.0, 0.0, 0.7).is_err());
        assert!(CameraPose::new(3.0, 1.0, std::f64::consts::TAU, 0.7).is_err());
        assert!(CameraPose::new(-1.0, 1.0, 0.0, 0.7).is_err());
    }

    #[test]
    fn blob_bias_values() {
        let d = BlobParams::default();
        assert_eq!(density_blob_bias(0.0, &d), 0.0);
        assert_eq!(density_blob_bias(2.0, &d), 4.0);
        let p = BlobParams {
            lambda_tau: 0.5,
            radius: 1.0,
        };
        assert_eq!(density_blob_bias(3.0, &p), 2.0);
        assert_eq!(density_blob_bias(1.0, &p), 0.0);
        assert_eq!(density_blob_bias(0.25, &p), density_blob_bias(1.75, &p));
    }

    #[test]
    fn camera_basis_is_orthonormal() {
        let cam = CameraPose::new(4.0, 1.1, 2.3, 0.7).unwrap();
        let (r, u, f) = cam.basis();
        for v in [r, u, f] {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(r.dot(u).abs() < 1e-12 && r.dot(f).abs() < 1e-12 && u.dot(f).abs() < 1e-12);
        assert!((cam.position().norm() - 4.0).abs() < 1e-12);
        let center = cam.ray(50, 50, 101);
        assert!((center.dot(f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frontal_center_pixel_normal_faces_camera() {
        let cam = CameraPose::new(4.0, FRAC_PI_2, 0.0, 40f64.to_radians()).unwrap();
        let l = light(cam.position(), Vec3::ONE, Vec3::ZERO);
        let img = render_sdf(&SphereSdf::unit(), &cam, &l, ShadingMode::Normal, 33).unwrap();
        let px = [img.get(16, 16, 0), img.get(16, 16, 1), img.get(16, 16, 2)];
        assert!(
            (px[0] - 0.5).abs() < 1e-9 && (px[1] - 0.5).abs() < 1e-9 && (px[2] - 1.0).abs() < 1e-9,
            "{px:?}"
        );
    }

    #[test]
    fn empty_scene_is_background() {
        let cam = CameraPose::new(4.0, 1.0, 0.5, 0.7).unwrap();
        let l = light(cam.position(), Vec3::ONE, Vec3::splat(0.3));
        let img = render_sdf(&EmptySdf, &cam, &l, ShadingMode::Shaded, 16).unwrap();
        assert!(img.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn blob_on_constant_field_renders_a_sphere() {
        // -1 + |p|^2 has its zero set on the unit sphere.
        let blob = BlobBiasedSdf {
            inner: ConstantField(-1.0),
            params: BlobParams::default(),
        };
        let cam = CameraPose::new(4.0, FRAC_PI_2, 0.0, 40f64.to_radians()).unwrap();
        let l = light(cam.position(), Vec3::ONE, Vec3::ZERO);
        let a = render_sdf(&blob, &cam, &l, ShadingMode::Textureless, 64).unwrap();
        let b = render_sdf(&SphereSdf::unit(), &cam, &l, ShadingMode::Textureless, 64).unwrap();
        assert_eq!(silhouette_pixels(&a), silhouette_pixels(&b));
        let diff = a.max_abs_diff(&b).unwrap();
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn resolution_limit() {
        let cam = CameraPose::new(4.0, 1.0, 0.5, 0.7).unwrap();
        let l = light(cam.position(), Vec3::ONE, Vec3::ZERO);
        assert!(render_sdf(&EmptySdf, &cam, &l, ShadingMode::Shaded, 257).is_err());
    }

    #[test]
    fn textureless_ratio_sampling() {
        let mut rng = SplitMix64::new(5);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_shading_mode(&mut rng, 0.2) == ShadingMode::Textureless)
            .count();
        assert!((hits as f64 / n as f64 - 0.2).abs() < 0.01);
        assert_eq!(sample_shading_mode(&mut rng, 0.0), ShadingMode::Shaded);
    }
}
