//! Flat `key = value` experiment configuration.
//!
//! Values are resolved in three layers: per-experiment defaults, then the
//! config file, then `--key value` overrides. Unknown keys and out-of-range
//! values are rejected before anything runs, with the offending key named.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diffusion::{DiffusionSchedule, Weighting};
use crate::error::{Error, Result};
use crate::estimators::{
    BoxBlurEstimator, ConstantEstimator, GaussianPriorEstimator, IdentityEstimator, NoiseEstimator,
};
use crate::render::{CameraPose, PointLight, Vec3};
use crate::tiling::TilingPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Equivalence,
    StrideAblation,
    SdsConvergence,
    ShadingDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Equivalence,
        Experiment::StrideAblation,
        Experiment::SdsConvergence,
        Experiment::ShadingDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Equivalence => "equivalence",
            Experiment::StrideAblation => "stride_ablation",
            Experiment::SdsConvergence => "sds_convergence",
            Experiment::ShadingDemo => "shading_demo",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                format!("unknown experiment `{s}` (expected equivalence, stride_ablation, sds_convergence or shading_demo)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    GaussianPrior,
    Constant,
    BoxBlur,
    Identity,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::GaussianPrior => "gaussian_prior",
            EstimatorKind::Constant => "constant",
            EstimatorKind::BoxBlur => "box_blur",
            EstimatorKind::Identity => "identity",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [
            EstimatorKind::GaussianPrior,
            EstimatorKind::Constant,
            EstimatorKind::BoxBlur,
            EstimatorKind::Identity,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| {
            format!(
                "unknown estimator `{s}` (expected gaussian_prior, constant, box_blur or identity)"
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub window: usize,
    pub stride: usize,
    pub strides: Vec<usize>,
    pub schedule_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub omega: Weighting,
    pub estimator: EstimatorKind,
    pub prior_mean: f64,
    pub constant: f64,
    pub blur_radius: usize,
    pub timestep: usize,
    pub condition: String,
    pub steps: usize,
    pub lr: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub init: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub resolution: usize,
    pub camera_radius: f64,
    pub camera_polar_deg: f64,
    pub fov_deg: f64,
    pub light_intensity: f64,
    pub ambient: f64,
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "experiment",
    "height",
    "width",
    "channels",
    "window",
    "stride",
    "strides",
    "schedule_steps",
    "beta_start",
    "beta_end",
    "omega",
    "estimator",
    "prior_mean",
    "constant",
    "blur_radius",
    "timestep",
    "condition",
    "steps",
    "lr",
    "t_min",
    "t_max",
    "init",
    "seed",
    "output_dir",
    "resolution",
    "camera_radius",
    "camera_polar_deg",
    "fov_deg",
    "light_intensity",
    "ambient",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_finite(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("`{value}` is not finite")))
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            height: 128,
            width: 128,
            channels: 4,
            window: crate::tiling::DEFAULT_WINDOW,
            stride: 32,
            strides: vec![16, 32, 48, 64],
            schedule_steps: 1000,
            beta_start: 1e-4,
            beta_end: 2e-2,
            omega: Weighting::OneMinusAlphaBar,
            estimator: EstimatorKind::GaussianPrior,
            prior_mean: 0.7,
            constant: 0.0,
            blur_radius: 4,
            timestep: 500,
            condition: String::new(),
            steps: 500,
            lr: 0.01,
            t_min: 20,
            t_max: 980,
            init: 0.0,
            seed: 42,
            output_dir: PathBuf::from(format!("out/{experiment}")),
            resolution: 128,
            camera_radius: 4.0,
            camera_polar_deg: 90.0,
            fov_deg: 40.0,
            light_intensity: 1.0,
            ambient: 0.1,
        };
        match experiment {
            Experiment::StrideAblation => ExperimentConfig {
                estimator: EstimatorKind::BoxBlur,
                ..base
            },
            Experiment::SdsConvergence => ExperimentConfig {
                height: 64,
                width: 64,
                omega: Weighting::Unit,
                ..base
            },
            Experiment::Equivalence | Experiment::ShadingDemo => base,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => {
                let e: Experiment = parse(key, value)?;
                if e != self.experiment {
                    return Err(Error::config(
                        key,
                        format!(
                            "config is for `{e}` but `{}` was requested",
                            self.experiment
                        ),
                    ));
                }
            }
            "height" => self.height = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "channels" => self.channels = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "strides" => {
                self.strides = value
                    .split(',')
                    .map(|s| parse::<usize>(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "schedule_steps" => self.schedule_steps = parse(key, value)?,
            "beta_start" => self.beta_start = parse_finite(key, value)?,
            "beta_end" => self.beta_end = parse_finite(key, value)?,
            "omega" => self.omega = parse(key, value)?,
            "estimator" => self.estimator = parse(key, value)?,
            "prior_mean" => self.prior_mean = parse_finite(key, value)?,
            "constant" => self.constant = parse_finite(key, value)?,
            "blur_radius" => self.blur_radius = parse(key, value)?,
            "timestep" => self.timestep = parse(key, value)?,
            "condition" => self.condition = value.to_string(),
            "steps" => self.steps = parse(key, value)?,
            "lr" => self.lr = parse_finite(key, value)?,
            "t_min" => self.t_min = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "init" => self.init = parse_finite(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output_dir" => {
                if value.is_empty() {
                    return Err(Error::config(key, "must not be empty"));
                }
                self.output_dir = PathBuf::from(value)
            }
            "resolution" => self.resolution = parse(key, value)?,
            "camera_radius" => self.camera_radius = parse_finite(key, value)?,
            "camera_polar_deg" => self.camera_polar_deg = parse_finite(key, value)?,
            "fov_deg" => self.fov_deg = parse_finite(key, value)?,
            "light_intensity" => self.light_intensity = parse_finite(key, value)?,
            "ambient" => self.ambient = parse_finite(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {} is not `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Applies `--key value` pairs (or `--key=value`).
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut iter = args.iter();
        while let Some(arg) = iter.next() {
            let flag = arg
                .strip_prefix("--")
                .ok_or_else(|| Error::config(arg.as_str(), "expected a `--key value` override"))?;
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = iter
                        .next()
                        .ok_or_else(|| Error::config(flag, "missing value"))?;
                    (flag.to_string(), v.clone())
                }
            };
            self.set(&key.replace('-', "_"), &value)?;
        }
        Ok(())
    }

    /// Resolves defaults, then the file, then overrides, then validates.
    pub fn load(experiment: Experiment, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut config = Self::defaults(experiment);
        if let Some(path) = file {
            config.apply_file(path)?;
        }
        config.apply_overrides(overrides)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("height", self.height),
            ("width", self.width),
            ("channels", self.channels),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.window == 0 || self.window > self.height.min(self.width) {
            return Err(Error::config(
                "window",
                format!(
                    "{} must be in [1, min(height, width) = {}]",
                    self.window,
                    self.height.min(self.width)
                ),
            ));
        }
        self.plan(self.stride)
            .map_err(|e| Error::config("stride", e.to_string()))?;
        if self.strides.is_empty() {
            return Err(Error::config("strides", "needs at least one stride"));
        }
        for &s in &self.strides {
            self.plan(s)
                .map_err(|e| Error::config("strides", e.to_string()))?;
        }
        if self.schedule_steps == 0 {
            return Err(Error::config("schedule_steps", "must be positive"));
        }
        if !(self.beta_start > 0.0 && self.beta_start < 1.0) {
            return Err(Error::config("beta_start", "must lie in (0, 1)"));
        }
        if !(self.beta_end >= self.beta_start && self.beta_end < 1.0) {
            return Err(Error::config("beta_end", "must lie in [beta_start, 1)"));
        }
        self.schedule()
            .map_err(|e| Error::config("beta_start", e.to_string()))?;
        if self.blur_radius == 0 || 2 * self.blur_radius + 1 > self.window {
            return Err(Error::config(
                "blur_radius",
                format!(
                    "{} must satisfy 1 <= r and 2r + 1 <= window",
                    self.blur_radius
                ),
            ));
        }
        if self.timestep == 0 || self.timestep > self.schedule_steps {
            return Err(Error::config(
                "timestep",
                format!("must lie in [1, {}]", self.schedule_steps),
            ));
        }
        if self.t_min == 0 || self.t_min > self.schedule_steps {
            return Err(Error::config(
                "t_min",
                format!("must lie in [1, {}]", self.schedule_steps),
            ));
        }
        if self.t_max < self.t_min || self.t_max > self.schedule_steps {
            return Err(Error::config(
                "t_max",
                format!("must lie in [t_min, {}]", self.schedule_steps),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("lr", "must be positive"));
        }
        if self.experiment == Experiment::SdsConvergence
            && self.estimator != EstimatorKind::GaussianPrior
        {
            return Err(Error::config(
                "estimator",
                "sds_convergence needs gaussian_prior (its mean is the target)",
            ));
        }
        if self.resolution == 0 || self.resolution > 256 {
            return Err(Error::config("resolution", "must lie in [1, 256]"));
        }
        if !(self.camera_radius > 1.0) {
            return Err(Error::config(
                "camera_radius",
                "must exceed the unit sphere radius",
            ));
        }
        if !(self.camera_polar_deg > 0.0 && self.camera_polar_deg < 180.0) {
            return Err(Error::config("camera_polar_deg", "must lie in (0, 180)"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::config("fov_deg", "must lie in (0, 180)"));
        }
        for (key, v) in [
            ("light_intensity", self.light_intensity),
            ("ambient", self.ambient),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        DiffusionSchedule::linear(self.schedule_steps, self.beta_start, self.beta_end)
    }

    pub fn plan(&self, stride: usize) -> Result<TilingPlan> {
        TilingPlan::new(self.height, self.width, self.window, stride)
    }

    pub fn build_estimator(&self, schedule: &DiffusionSchedule) -> Result<Box<dyn NoiseEstimator>> {
        Ok(match self.estimator {
            EstimatorKind::GaussianPrior => Box::new(GaussianPriorEstimator::new(
                self.prior_mean,
                schedule.clone(),
            )?),
            EstimatorKind::Constant => Box::new(ConstantEstimator::new(self.constant)?),
            EstimatorKind::BoxBlur => Box::new(BoxBlurEstimator::new(self.blur_radius)?),
            EstimatorKind::Identity => Box::new(IdentityEstimator),
        })
    }

    pub fn camera(&self, azimuth: f64) -> Result<CameraPose> {
        CameraPose::new(
            self.camera_radius,
            self.camera_polar_deg.to_radians(),
            azimuth,
            self.fov_deg.to_radians(),
        )
    }

    pub fn light_at(&self, position: Vec3) -> Result<PointLight> {
        PointLight::new(
            position,
            Vec3::splat(self.light_intensity),
            Vec3::splat(self.ambient),
        )
    }

    fn value_of(&self, key: &str) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match key {
            "experiment" => self.experiment.to_string(),
            "height" => self.height.to_string(),
            "width" => self.width.to_string(),
            "channels" => self.channels.to_string(),
            "window" => self.window.to_string(),
            "stride" => self.stride.to_string(),
            "strides" => join(&self.strides),
            "schedule_steps" => self.schedule_steps.to_string(),
            "beta_start" => self.beta_start.to_string(),
            "beta_end" => self.beta_end.to_string(),
            "omega" => self.omega.to_string(),
            "estimator" => self.estimator.name().to_string(),
            "prior_mean" => self.prior_mean.to_string(),
            "constant" => self.constant.to_string(),
            "blur_radius" => self.blur_radius.to_string(),
            "timestep" => self.timestep.to_string(),
            "condition" => self.condition.clone(),
            "steps" => self.steps.to_string(),
            "lr" => self.lr.to_string(),
            "t_min" => self.t_min.to_string(),
            "t_max" => self.t_max.to_string(),
            "init" => self.init.to_string(),
            "seed" => self.seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "resolution" => self.resolution.to_string(),
            "camera_radius" => self.camera_radius.to_string(),
            "camera_polar_deg" => self.camera_polar_deg.to_string(),
            "fov_deg" => self.fov_deg.to_string(),
            "light_intensity" => self.light_intensity.to_string(),
            "ambient" => self.ambient.to_string(),
            _ => unreachable!("key list and accessor out of sync: {key}"),
        }
    }

    /// Fully resolved config in the same `key = value` format it is read from.
    /// `output_dir` is left out so that runs into different directories
    /// produce identical manifests.
    pub fn to_manifest(&self) -> String {
        KEYS.iter()
            .filter(|k| **k != "output_dir")
            .map(|k| format!("{k} = {}\n", self.value_of(k)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let mut c = ExperimentConfig::defaults(Experiment::StrideAblation);
        c.set("strides", "8, 16").unwrap();
        c.set("condition", "a ripe strawberry").unwrap();
        let mut back = ExperimentConfig::defaults(Experiment::StrideAblation);
        back.apply_text(&c.to_manifest()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = ExperimentConfig::defaults(Experiment::Equivalence);
        match c.apply_text("windw = 32").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "windw"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn out_of_range_values_are_named() {
        let cases = [
            ("window", "200"),
            ("stride", "0"),
            ("blur_radius", "40"),
            ("timestep", "0"),
            ("t_max", "5000"),
            ("lr", "-1"),
            ("resolution", "512"),
            ("ambient", "2"),
            ("beta_end", "1.5"),
        ];
        for (key, value) in cases {
            let err = ExperimentConfig::load(
                Experiment::Equivalence,
                None,
                &[format!("--{key}"), value.into()],
            )
            .unwrap_err();
            match err {
                Error::Config { key: k, .. } => assert_eq!(k, key, "{value}"),
                e => panic!("{key}: {e}"),
            }
        }
    }

    #[test]
    fn parse_errors_are_named() {
        let err = ExperimentConfig::load(
            Experiment::Equivalence,
            None,
            &["--seed".into(), "abc".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "seed"));
        let err =
            ExperimentConfig::load(Experiment::Equivalence, None, &["--seed".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "seed"));
    }

    #[test]
    fn overrides_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "# comment\nstride = 16\nseed = 1\n").unwrap();
        let c = ExperimentConfig::load(Experiment::Equivalence, Some(&path), &["--seed=9".into()])
            .unwrap();
        assert_eq!(c.stride, 16);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn experiment_key_must_match() {
        let mut c = ExperimentConfig::defaults(Experiment::Equivalence);
        assert!(c.set("experiment", "equivalence").is_ok());
        assert!(c.set("experiment", "shading_demo").is_err());
    }

    #[test]
    fn sds_needs_gaussian_prior() {
        let err = ExperimentConfig::load(
            Experiment::SdsConvergence,
            None,
            &["--estimator".into(), "box_blur".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "estimator"));
    }

    #[test]
    fn defaults_validate() {
        for e in Experiment::ALL {
            ExperimentConfig::defaults(e).validate().unwrap();
        }
    }
}
