//! Coefficient fields: two-region permeability geometries, material
//! parameters, and the parameter box sampled by the offline stage.
//!
//! Region 1 is the background, region 2 the union of the inclusions.
//! Permeability follows one of two laws:
//! LINEAR uses the fixed pair exp(1) / exp(10); EXP_PRESSURE evaluates
//! exp(p) / exp(10 p) at the local mean pressure.

use crate::mesh::TriMesh;
use crate::{Error, Result};
use std::fmt::Write as _;

/// Shipped default geometry (eight particles and two crossing strips,
/// roughly 20% inclusion area).
pub const DEFAULT_GEOMETRY: &str = include_str!("../data/geometry_default.txt");

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

/// Two-region geometry: points inside any circle or rectangle belong to
/// region 2, the rest to region 1.
#[derive(Clone, Debug, Default)]
pub struct GeometrySpec {
    pub circles: Vec<Circle>,
    pub rects: Vec<Rect>,
}

impl GeometrySpec {
    /// Region of a point; the inclusion wins on the boundary of a shape.
    pub fn region_of(&self, p: [f64; 2]) -> u8 {
        let inside_circle = self.circles.iter().any(|c| {
            let dx = p[0] - c.cx;
            let dy = p[1] - c.cy;
            dx * dx + dy * dy <= c.r * c.r
        });
        if inside_circle {
            return 2;
        }
        let inside_rect = self
            .rects
            .iter()
            .any(|r| p[0] >= r.x0 && p[0] <= r.x0 + r.w && p[1] >= r.y0 && p[1] <= r.y0 + r.h);
        if inside_rect {
            2
        } else {
            1
        }
    }

    /// Region per fine cell, evaluated at the cell centroid.
    pub fn region_per_cell(&self, mesh: &TriMesh) -> Vec<u8> {
        (0..mesh.n_cells())
            .map(|c| self.region_of(mesh.cell_centroid(c)))
            .collect()
    }

    /// Area fraction of region 2 under centroid sampling.
    pub fn inclusion_fraction(&self, mesh: &TriMesh) -> f64 {
        let mut a2 = 0.0;
        let mut total = 0.0;
        for c in 0..mesh.n_cells() {
            let a = mesh.cell_area(c);
            total += a;
            if self.region_of(mesh.cell_centroid(c)) == 2 {
                a2 += a;
            }
        }
        a2 / total
    }

    /// Parses the geometry format: `circle cx cy r` and `rect x0 y0 w h`
    /// lines, blank lines and `#` comments allowed. Errors carry 1-based
    /// line numbers.
    pub fn parse(text: &str) -> Result<GeometrySpec> {
        let mut geom = GeometrySpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Geometry(format!("line {}: bad number '{s}'", i + 1)))
            };
            match f[0] {
                "circle" if f.len() == 4 => {
                    let c = Circle {
                        cx: num(f[1])?,
                        cy: num(f[2])?,
                        r: num(f[3])?,
                    };
                    if !(c.r > 0.0) || !c.cx.is_finite() || !c.cy.is_finite() {
                        return Err(Error::Geometry(format!(
                            "line {}: circle needs finite center and r > 0",
                            i + 1
                        )));
                    }
                    geom.circles.push(c);
                }
                "rect" if f.len() == 5 => {
                    let r = Rect {
                        x0: num(f[1])?,
                        y0: num(f[2])?,
                        w: num(f[3])?,
                        h: num(f[4])?,
                    };
                    if !(r.w > 0.0) || !(r.h > 0.0) || !r.x0.is_finite() || !r.y0.is_finite() {
                        return Err(Error::Geometry(format!(
                            "line {}: rect needs finite origin and w, h > 0",
                            i + 1
                        )));
                    }
                    geom.rects.push(r);
                }
                _ => {
                    return Err(Error::Geometry(format!(
                        "line {}: expected 'circle cx cy r' or 'rect x0 y0 w h', got '{line}'",
                        i + 1
                    )))
                }
            }
        }
        Ok(geom)
    }

    pub fn read(path: &std::path::Path) -> Result<GeometrySpec> {
        GeometrySpec::parse(&std::fs::read_to_string(path)?)
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        for c in &self.circles {
            let _ = writeln!(s, "circle {} {} {}", c.cx, c.cy, c.r);
        }
        for r in &self.rects {
            let _ = writeln!(s, "rect {} {} {} {}", r.x0, r.y0, r.w, r.h);
        }
        s
    }
}

/// Built-in default geometry.
pub fn default_geometry() -> GeometrySpec {
    GeometrySpec::parse(DEFAULT_GEOMETRY).expect("shipped default geometry must parse")
}

/// Permeability law selecting how region permeabilities respond to the
/// local mean pressure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PermeabilityLaw {
    /// Fixed contrast exp(1) / exp(10), no parameter dependence.
    Linear,
    /// exp(p) in region 1, exp(10 p) in region 2.
    ExpPressure,
}

impl PermeabilityLaw {
    pub fn parse(s: &str) -> Option<PermeabilityLaw> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(PermeabilityLaw::Linear),
            "exp_pressure" => Some(PermeabilityLaw::ExpPressure),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PermeabilityLaw::Linear => "linear",
            PermeabilityLaw::ExpPressure => "exp_pressure",
        }
    }
}

/// Material parameters for both regions.
#[derive(Clone, Debug)]
pub struct CoefficientModel {
    pub law: PermeabilityLaw,
    /// Biot modulus M per region.
    pub biot_modulus: [f64; 2],
    /// Biot coupling coefficient.
    pub alpha: f64,
    /// Young's modulus per region.
    pub youngs: [f64; 2],
    /// Poisson ratio, shared by both regions.
    pub poisson: f64,
}

impl CoefficientModel {
    /// The published experiment's material table: M = (1, 10), alpha = 0.9,
    /// E = (10, 1), eta = 0.22.
    pub fn with_law(law: PermeabilityLaw) -> CoefficientModel {
        CoefficientModel {
            law,
            biot_modulus: [1.0, 10.0],
            alpha: 0.9,
            youngs: [10.0, 1.0],
            poisson: 0.22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.biot_modulus.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Config("Biot modulus must be positive".into()));
        }
        if self.youngs.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("Young's modulus must be positive".into()));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::Config(format!(
                "Poisson ratio must lie in (0, 0.5), got {}",
                self.poisson
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "Biot coefficient must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Permeability of a region at mean pressure `p_bar`. The exponent
    /// guard rejects |e| > 700 before exp() overflows.
    pub fn permeability(&self, region: u8, p_bar: f64) -> Result<f64> {
        let exponent = match (self.law, region) {
            (PermeabilityLaw::Linear, 1) => 1.0,
            (PermeabilityLaw::Linear, 2) => 10.0,
            (PermeabilityLaw::ExpPressure, 1) => p_bar,
            (PermeabilityLaw::ExpPressure, 2) => 10.0 * p_bar,
            _ => return Err(Error::Numerical(format!("unknown region {region}"))),
        };
        if !exponent.is_finite() || exponent.abs() > 700.0 {
            return Err(Error::Numerical(format!(
                "permeability exponent {exponent} out of range for region {region}"
            )));
        }
        Ok(exponent.exp())
    }

    /// True when permeability depends on the pressure parameter.
    pub fn k_is_parametric(&self) -> bool {
        self.law == PermeabilityLaw::ExpPressure
    }

    /// Plane-strain Lame pair (lambda, mu) of a region.
    pub fn lame(&self, region: u8) -> (f64, f64) {
        let e = self.youngs[(region - 1) as usize];
        lame_from_e_eta(e, self.poisson)
    }

    /// Storage coefficient 1/M of a region.
    pub fn inv_biot_modulus(&self, region: u8) -> f64 {
        1.0 / self.biot_modulus[(region - 1) as usize]
    }

    /// Elastic spectral weight lambda + 2 mu of a region.
    pub fn elastic_weight(&self, region: u8) -> f64 {
        let (l, m) = self.lame(region);
        l + 2.0 * m
    }
}

/// Plane-strain conversion mu = E/(2(1+eta)), lambda = E eta/((1+eta)(1-2 eta)).
pub fn lame_from_e_eta(e: f64, eta: f64) -> (f64, f64) {
    let mu = e / (2.0 * (1.0 + eta));
    let lambda = e * eta / ((1.0 + eta) * (1.0 - 2.0 * eta));
    (lambda, mu)
}

/// Parameter box sampled by the offline stage: `n` intervals on
/// [p_min, p_max] give n+1 grid values. Displacement bounds are carried for
/// completeness; the shipped laws ignore them.
#[derive(Clone, Debug)]
pub struct ParameterBox {
    pub p_min: f64,
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub n: usize,
}

impl ParameterBox {
    pub fn new(p_min: f64, p_max: f64, n: usize) -> Result<ParameterBox> {
        let b = ParameterBox {
            p_min,
            p_max,
            u_min: 0.0,
            u_max: 1.0,
            n,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_min < self.p_max) {
            return Err(Error::Config(format!(
                "parameter box needs p_min < p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if self.n < 1 {
            return Err(Error::Config("parameter box needs at least 1 interval".into()));
        }
        Ok(())
    }

    /// Uniform pressure samples p_j = p_min + j (p_max - p_min)/n.
    pub fn pressure_grid(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|j| self.p_min + j as f64 * (self.p_max - self.p_min) / self.n as f64)
            .collect()
    }
}

/// Local parameter value of one neighborhood: mean pressure and mean
/// displacement magnitude over the neighborhood.
#[derive(Clone, Copy, Debug)]
pub struct Mu {
    pub p_bar: f64,
    pub u_bar: f64,
}

/// Area-weighted mean of a nodal field over a set of cells, exact for P1.
pub fn average_over(mesh: &TriMesh, cells: &[usize], nodal: &[f64]) -> f64 {
    let mut int = 0.0;
    let mut area = 0.0;
    for &c in cells {
        let a = mesh.cell_area(c);
        let [i, j, k] = mesh.cells[c];
        int += a / 3.0 * (nodal[i] + nodal[j] + nodal[k]);
        area += a;
    }
    int / area
}

/// Area-weighted mean of the Euclidean norm of an interleaved nodal vector
/// field (P1 interpolant of the nodal magnitudes).
pub fn average_norm_over(mesh: &TriMesh, cells: &[usize], u: &[f64]) -> f64 {
    let mut int = 0.0;
    let mut area = 0.0;
    for &c in cells {
        let a = mesh.cell_area(c);
        let s: f64 = mesh.cells[c]
            .iter()
            .map(|&n| (u[2 * n] * u[2 * n] + u[2 * n + 1] * u[2 * n + 1]).sqrt())
            .sum();
        int += a / 3.0 * s;
        area += a;
    }
    int / area
}
