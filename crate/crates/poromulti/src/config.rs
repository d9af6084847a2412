//! Flat key=value experiment configuration.
//!
//! The file format is one `key = value` pair per line, `#` starts a
//! comment, lists are comma-separated. Unknown and duplicate keys are
//! rejected with the offending line number so a typo cannot silently fall
//! back to a default.

use crate::assembly::BCSpec;
use crate::fields::{default_geometry, GeometrySpec, ParameterBox, PermeabilityLaw};
use crate::gmsfem::SnapshotFamily;
use crate::solver_coarse::RefreshCadence;
use crate::solver_fine::SolverConfig;
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Everything one experiment needs: meshes, law, snapshot family,
/// online-dimension sweep and time stepping controls.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Fine structured-mesh refinement (n cells per side).
    pub fine_n: usize,
    /// Coarse refinements to sweep; each must divide `fine_n`.
    pub coarse_n: Vec<usize>,
    /// Geometry file; the embedded default when absent.
    pub geometry: Option<PathBuf>,
    pub law: PermeabilityLaw,
    pub snapshot: SnapshotFamily,
    /// Parameter-grid intervals N; the offline stage samples N+1 values.
    pub n_param: usize,
    /// Spectral snapshot count per neighborhood and parameter.
    pub l_snap: usize,
    /// Online pressure dimensions to sweep.
    pub n_on_p: Vec<usize>,
    /// Online displacement dimensions to sweep.
    pub n_on_u: Vec<usize>,
    pub tau: f64,
    pub steps: usize,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub p_top: f64,
    pub p_bottom: f64,
    /// Parameter box for the offline sampling.
    pub p_min: f64,
    pub p_max: f64,
    /// Sign toggle on the coupling blocks, +1 or -1.
    pub coupling_sign: f64,
    /// When the parametric online pressure spaces are re-selected.
    pub refresh: RefreshCadence,
    pub out_dir: PathBuf,
    /// Offline cache directory; `<out_dir>/offline` when absent.
    pub offline_cache: Option<PathBuf>,
    /// Also write VTK files for the final states.
    pub export_vtk: bool,
    /// Seed for randomized utilities (unused by the solvers themselves).
    pub seed: u64,
}

impl Default for ExperimentConfig {
    /// The published experiment: fine 60x60 against coarse 5x5 and 10x10,
    /// ten steps to T = 0.055, unit pressure drop top to bottom.
    fn default() -> Self {
        ExperimentConfig {
            fine_n: 60,
            coarse_n: vec![5, 10],
            geometry: None,
            law: PermeabilityLaw::Linear,
            snapshot: SnapshotFamily::Harmonic,
            n_param: 20,
            l_snap: 16,
            n_on_p: vec![2, 4, 8, 12],
            n_on_u: vec![4, 8, 12],
            tau: 0.0055,
            steps: 10,
            picard_tol: 1e-5,
            picard_max: 50,
            p_top: 1.0,
            p_bottom: 0.0,
            p_min: 0.0,
            p_max: 1.0,
            coupling_sign: 1.0,
            refresh: RefreshCadence::EveryIteration,
            out_dir: PathBuf::from("results"),
            offline_cache: None,
            export_vtk: false,
            seed: 0,
        }
    }
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Config(format!("line {line}: {key} wants an integer, got '{v}'")))
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>()
        .map_err(|_| Error::Config(format!("line {line}: {key} wants an integer, got '{v}'")))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("line {line}: {key} wants a number, got '{v}'")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {line}: {key} wants true or false, got '{v}'"
        ))),
    }
}

fn parse_usize_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| parse_usize(line, key, s.trim()))
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line}: expected key = value, got '{body}'"
                )));
            };
            let key = key.trim();
            let v = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {line}: duplicate key '{key}'")));
            }
            seen.push(key.to_string());
            match key {
                "fine_n" => cfg.fine_n = parse_usize(line, key, v)?,
                "coarse_n" => cfg.coarse_n = parse_usize_list(line, key, v)?,
                "geometry" => cfg.geometry = Some(PathBuf::from(v)),
                "law" => {
                    // "nonlinear" is accepted as the experiment-facing name
                    // of the pressure-dependent law.
                    cfg.law = match v.to_ascii_lowercase().as_str() {
                        "nonlinear" => PermeabilityLaw::ExpPressure,
                        other => PermeabilityLaw::parse(other).ok_or_else(|| {
                            Error::Config(format!(
                                "line {line}: law must be linear, nonlinear or exp_pressure, got '{v}'"
                            ))
                        })?,
                    }
                }
                "snapshot" => {
                    cfg.snapshot = SnapshotFamily::parse(v).ok_or_else(|| {
                        Error::Config(format!(
                            "line {line}: snapshot must be harmonic or spectral, got '{v}'"
                        ))
                    })?
                }
                "n_param" => cfg.n_param = parse_usize(line, key, v)?,
                "l_snap" => cfg.l_snap = parse_usize(line, key, v)?,
                "n_on_p" => cfg.n_on_p = parse_usize_list(line, key, v)?,
                "n_on_u" => cfg.n_on_u = parse_usize_list(line, key, v)?,
                "tau" => cfg.tau = parse_f64(line, key, v)?,
                "steps" => cfg.steps = parse_usize(line, key, v)?,
                "picard_tol" => cfg.picard_tol = parse_f64(line, key, v)?,
                "picard_max" => cfg.picard_max = parse_usize(line, key, v)?,
                "p_top" => cfg.p_top = parse_f64(line, key, v)?,
                "p_bottom" => cfg.p_bottom = parse_f64(line, key, v)?,
                "p_min" => cfg.p_min = parse_f64(line, key, v)?,
                "p_max" => cfg.p_max = parse_f64(line, key, v)?,
                "coupling_sign" => cfg.coupling_sign = parse_f64(line, key, v)?,
                "online_refresh" => {
                    cfg.refresh = RefreshCadence::parse(v).ok_or_else(|| {
                        Error::Config(format!(
                            "line {line}: online_refresh must be iteration or step, got '{v}'"
                        ))
                    })?
                }
                "out" => cfg.out_dir = PathBuf::from(v),
                "offline_cache" => cfg.offline_cache = Some(PathBuf::from(v)),
                "export_vtk" => cfg.export_vtk = parse_bool(line, key, v)?,
                "seed" => cfg.seed = parse_u64(line, key, v)?,
                _ => {
                    return Err(Error::Config(format!("line {line}: unknown key '{key}'")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine_n < 2 {
            return Err(Error::Config(format!(
                "fine_n must be at least 2, got {}",
                self.fine_n
            )));
        }
        if self.coarse_n.is_empty() {
            return Err(Error::Config("coarse_n must list at least one grid".into()));
        }
        for &c in &self.coarse_n {
            if c < 2 || c > self.fine_n || self.fine_n % c != 0 {
                return Err(Error::Config(format!(
                    "coarse_n {c} must be at least 2 and divide fine_n {}",
                    self.fine_n
                )));
            }
        }
        if self.n_on_p.is_empty() || self.n_on_u.is_empty() {
            return Err(Error::Config("n_on_p and n_on_u must be nonempty".into()));
        }
        if self.n_on_p.iter().chain(&self.n_on_u).any(|&n| n == 0) {
            return Err(Error::Config("online dimensions must be positive".into()));
        }
        if self.pairs().is_empty() {
            return Err(Error::Config(
                "no sweep rows: every n_on_u is smaller than every n_on_p".into(),
            ));
        }
        if self.l_snap == 0 {
            return Err(Error::Config("l_snap must be positive".into()));
        }
        ParameterBox::new(self.p_min, self.p_max, self.n_param)?;
        self.solver_config().validate()?;
        Ok(())
    }

    /// Sweep rows (N_on^p, N_on^u), every pair with N_on^p <= N_on^u,
    /// ordered by displacement count then pressure count.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut ps = self.n_on_p.clone();
        let mut us = self.n_on_u.clone();
        ps.sort_unstable();
        ps.dedup();
        us.sort_unstable();
        us.dedup();
        let mut out = Vec::new();
        for &u in &us {
            for &p in &ps {
                if p <= u {
                    out.push((p, u));
                }
            }
        }
        out
    }

    /// Offline headroom: largest requested online dimension plus 4 spare
    /// directions. Per-neighborhood snapshot rank caps it later.
    pub fn n_off(&self) -> usize {
        let m = self
            .n_on_p
            .iter()
            .chain(&self.n_on_u)
            .copied()
            .max()
            .unwrap_or(1);
        m + 4
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            steps: self.steps,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            p_init: self.p_bottom,
            bc: BCSpec {
                p_top: self.p_top,
                p_bottom: self.p_bottom,
            },
            coupling_sign: self.coupling_sign,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        ParameterBox {
            p_min: self.p_min,
            p_max: self.p_max,
            u_min: 0.0,
            u_max: 1.0,
            n: self.n_param,
        }
        .pressure_grid()
    }

    pub fn load_geometry(&self) -> Result<GeometrySpec> {
        match &self.geometry {
            Some(path) => GeometrySpec::read(path),
            None => Ok(default_geometry()),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.offline_cache
            .clone()
            .unwrap_or_else(|| self.out_dir.join("offline"))
    }

    /// Canonical key=value text; `parse` round-trips it.
    pub fn format(&self) -> String {
        let mut s = String::new();
        let list = |v: &[usize]| {
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        s.push_str(&format!("fine_n = {}\n", self.fine_n));
        s.push_str(&format!("coarse_n = {}\n", list(&self.coarse_n)));
        if let Some(g) = &self.geometry {
            s.push_str(&format!("geometry = {}\n", g.display()));
        }
        let law = match self.law {
            PermeabilityLaw::Linear => "linear",
            PermeabilityLaw::ExpPressure => "nonlinear",
        };
        s.push_str(&format!("law = {law}\n"));
        s.push_str(&format!("snapshot = {}\n", self.snapshot.as_str()));
        s.push_str(&format!("n_param = {}\n", self.n_param));
        s.push_str(&format!("l_snap = {}\n", self.l_snap));
        s.push_str(&format!("n_on_p = {}\n", list(&self.n_on_p)));
        s.push_str(&format!("n_on_u = {}\n", list(&self.n_on_u)));
        s.push_str(&format!("tau = {}\n", self.tau));
        s.push_str(&format!("steps = {}\n", self.steps));
        s.push_str(&format!("picard_tol = {}\n", self.picard_tol));
        s.push_str(&format!("picard_max = {}\n", self.picard_max));
        s.push_str(&format!("p_top = {}\n", self.p_top));
        s.push_str(&format!("p_bottom = {}\n", self.p_bottom));
        s.push_str(&format!("p_min = {}\n", self.p_min));
        s.push_str(&format!("p_max = {}\n", self.p_max));
        s.push_str(&format!("coupling_sign = {}\n", self.coupling_sign));
        s.push_str(&format!("online_refresh = {}\n", self.refresh.as_str()));
        s.push_str(&format!("out = {}\n", self.out_dir.display()));
        if let Some(c) = &self.offline_cache {
            s.push_str(&format!("offline_cache = {}\n", c.display()));
        }
        s.push_str(&format!("export_vtk = {}\n", self.export_vtk));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }
}
