//! Study configuration: a flat key-value text format, lossless float
//! round-tripping, CLI overrides, and the curvature-data file format.

use crate::bubble::Dimension;
use crate::curvature::CurvatureData;
use crate::error::{Error, Result};
use crate::hash::Fnv64;

/// Everything a study needs. Defaults target n = 8 with unit-scale random
/// curvature, seed 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n: u32,
    pub seed: u64,
    pub scale: f64,
    /// Optional path to a curvature file; overrides seed/scale generation.
    pub curvature_file: Option<String>,
    pub grid_nr: usize,
    pub grid_nt: usize,
    pub grid_rmax: f64,
    pub grid_tmax: f64,
    pub grid_stretch: f64,
    pub tol: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_points: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_points: usize,
    /// λ of the δ = λ ε^{1/4} coupling in scaling studies.
    pub lambda_scaling: f64,
    /// δ used by the profile command.
    pub delta: f64,
    pub rho0: f64,
    pub c_h: f64,
    pub h_exponent: f64,
    pub r_scalar_ct: f64,
    pub qmc_directions: usize,
    pub radial_nodes: usize,
    pub out: String,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            n: 8,
            seed: 1,
            scale: 1.0,
            curvature_file: None,
            grid_nr: 400,
            grid_nt: 400,
            grid_rmax: 160.0,
            grid_tmax: 160.0,
            grid_stretch: 1.02,
            tol: 1e-12,
            eps_min: 1e-6,
            eps_max: 1e-2,
            eps_points: 9,
            lambda_a: 0.2,
            lambda_b: 2.0,
            lambda_points: 121,
            lambda_scaling: 0.5,
            delta: 0.1,
            rho0: 1.0,
            c_h: 15.0,
            h_exponent: 2.0,
            r_scalar_ct: 0.0,
            qmc_directions: 192,
            radial_nodes: 96,
            out: "out".into(),
        }
    }
}

macro_rules! config_fields {
    ($macro_cb:ident) => {
        $macro_cb! {
            n: u32,
            seed: u64,
            scale: f64,
            grid_nr: usize,
            grid_nt: usize,
            grid_rmax: f64,
            grid_tmax: f64,
            grid_stretch: f64,
            tol: f64,
            eps_min: f64,
            eps_max: f64,
            eps_points: usize,
            lambda_a: f64,
            lambda_b: f64,
            lambda_points: usize,
            lambda_scaling: f64,
            delta: f64,
            rho0: f64,
            c_h: f64,
            h_exponent: f64,
            r_scalar_ct: f64,
            qmc_directions: usize,
            radial_nodes: usize,
        }
    };
}

impl StudyConfig {
    /// Serialize as `key = value` lines. Floats use the shortest
    /// representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# halfbubble study configuration\n");
        macro_rules! emit {
            ($($field:ident: $ty:ty),* $(,)?) => {
                $( s.push_str(&format!("{} = {}\n", stringify!($field), self.$field)); )*
            };
        }
        config_fields!(emit);
        if let Some(f) = &self.curvature_file {
            s.push_str(&format!("curvature_file = {f}\n"));
        }
        s.push_str(&format!("out = {}\n", self.out));
        s
    }

    /// Parse the same format; unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err =
                |k: &str, v: &str| Error::Config(format!("bad value for {k}: {v:?}"));
            macro_rules! apply {
                ($($field:ident: $ty:ty),* $(,)?) => {
                    match key {
                        $( stringify!($field) => {
                            cfg.$field = value.parse::<$ty>().map_err(|_| parse_err(key, value))?;
                        } )*
                        "curvature_file" => cfg.curvature_file = Some(value.to_string()),
                        "out" => cfg.out = value.to_string(),
                        other => return Err(Error::Config(format!("unknown key {other:?}"))),
                    }
                };
            }
            config_fields!(apply);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<StudyConfig> {
        StudyConfig::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        Dimension::new(self.n)?;
        if !(self.scale > 0.0) {
            return Err(Error::Config(format!("scale must be positive: {}", self.scale)));
        }
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max) {
            return Err(Error::Config(format!(
                "need 0 < eps_min < eps_max, got [{}, {}]",
                self.eps_min, self.eps_max
            )));
        }
        if !(0.0 < self.lambda_a && self.lambda_a < self.lambda_b) {
            return Err(Error::Config(format!(
                "need 0 < lambda_a < lambda_b, got [{}, {}]",
                self.lambda_a, self.lambda_b
            )));
        }
        if self.eps_points < 2 || self.lambda_points < 2 {
            return Err(Error::Config("need at least 2 grid points".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive: {}", self.tol)));
        }
        Ok(())
    }

    /// Hash of the canonical serialization, embedded in every emitted file.
    /// The output directory is excluded: it does not affect the computation.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        for line in self.to_text().lines() {
            if !line.starts_with("out =") {
                h.write_str(line);
                h.write_str("\n");
            }
        }
        h.finish()
    }

    /// The ε grid (geometric, decreasing from eps_max to eps_min).
    pub fn eps_grid(&self) -> Vec<f64> {
        crate::asymptotics::geometric_eps_grid(self.eps_max, self.eps_min, self.eps_points)
    }

    /// Curvature data per the config: from file when given, else seeded.
    pub fn curvature(&self) -> Result<CurvatureData> {
        let n = Dimension::new(self.n)?;
        match &self.curvature_file {
            Some(path) => {
                let curv = read_curvature_file(std::path::Path::new(path))?;
                if curv.dimension() != n {
                    return Err(Error::Config(format!(
                        "curvature file has n = {}, config has n = {}",
                        curv.dimension(),
                        self.n
                    )));
                }
                Ok(curv)
            }
            None => crate::curvature::random_admissible(self.seed, self.scale, n),
        }
    }

    /// The corrector grid per the config.
    pub fn grid(&self) -> Result<crate::corrector::RadialGrid> {
        crate::corrector::RadialGrid::new(
            self.grid_nr,
            self.grid_nt,
            self.grid_rmax,
            self.grid_tmax,
            self.grid_stretch,
        )
    }

    pub fn study_options(&self) -> crate::asymptotics::StudyOptions {
        crate::asymptotics::StudyOptions {
            rho0: self.rho0,
            c_h: self.c_h,
            h_exponent: self.h_exponent,
            r_scalar_ct: self.r_scalar_ct,
            directions: self.qmc_directions,
            radial_nodes: self.radial_nodes,
            seed: self.seed,
        }
    }
}

/// Write curvature data as a structured text document. Field names are part
/// of the interface: n, seed, scale, rbar (dense row-major (i,k,j,l)),
/// rnn (dense (n-1)²).
pub fn curvature_to_text(curv: &CurvatureData, seed: Option<u64>, scale: Option<f64>) -> String {
    let mut s = String::from("# halfbubble curvature data\n");
    s.push_str(&format!("n = {}\n", curv.dimension()));
    if let Some(seed) = seed {
        s.push_str(&format!("seed = {seed}\n"));
    }
    if let Some(scale) = scale {
        s.push_str(&format!("scale = {scale}\n"));
    }
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    s.push_str(&format!("rbar = {}\n", join(curv.rbar_entries())));
    s.push_str(&format!("rnn = {}\n", join(curv.rnn_entries())));
    s
}

/// Parse the curvature file format.
pub fn curvature_from_text(text: &str) -> Result<CurvatureData> {
    let mut n: Option<u32> = None;
    let mut rbar: Option<Vec<f64>> = None;
    let mut rnn: Option<Vec<f64>> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config("curvature file: expected key = value".into()))?;
        let parse_vec = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad float {tok:?}")))
                })
                .collect()
        };
        match key.trim() {
            "n" => {
                n = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config("bad n".into()))?,
                )
            }
            "seed" | "scale" => {} // provenance only
            "rbar" => rbar = Some(parse_vec(value)?),
            "rnn" => rnn = Some(parse_vec(value)?),
            other => return Err(Error::Config(format!("unknown curvature key {other:?}"))),
        }
    }
    let n = Dimension::new(n.ok_or_else(|| Error::Config("curvature file missing n".into()))?)?;
    CurvatureData::new(
        n,
        rbar.ok_or_else(|| Error::Config("curvature file missing rbar".into()))?,
        rnn.ok_or_else(|| Error::Config("curvature file missing rnn".into()))?,
    )
}

pub fn read_curvature_file(path: &std::path::Path) -> Result<CurvatureData> {
    curvature_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::random_admissible;

    #[test]
    fn config_roundtrips_losslessly() {
        let mut cfg = StudyConfig::default();
        cfg.eps_min = 1.2345678901234567e-7;
        cfg.lambda_b = 1.9999999999999998;
        cfg.curvature_file = Some("data/curv.txt".into());
        let text = cfg.to_text();
        let back = StudyConfig::from_text(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.content_hash(), cfg.content_hash());
    }

    #[test]
    fn config_rejects_bad_inputs() {
        assert!(StudyConfig::from_text("n = 2\n").is_err());
        assert!(StudyConfig::from_text("unknown_key = 3\n").is_err());
        assert!(StudyConfig::from_text("eps_min = 0.1\neps_max = 0.01\n").is_err());
        assert!(StudyConfig::from_text("lambda_a = 2\nlambda_b = 1\n").is_err());
        assert!(StudyConfig::from_text("n eight\n").is_err());
    }

    #[test]
    fn curvature_file_roundtrip() {
        let n = Dimension::new(8).unwrap();
        let curv = random_admissible(3, 1.0, n).unwrap();
        let text = curvature_to_text(&curv, Some(3), Some(1.0));
        let back = curvature_from_text(&text).unwrap();
        assert_eq!(back, curv);
        assert_eq!(back.content_hash(), curv.content_hash());
        assert!(curvature_from_text("n = 8\n").is_err());
    }
}
