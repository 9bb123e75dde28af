//! Ground-truth trajectories for the benchmark systems.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HqrcError, Result};

/// Largest `|β·ΔV|` accepted by the double-scroll `sinh` term.
pub const SINH_GUARD: f64 = 700.0;

pub const LORENZ63_IC: [f64; 3] = [17.67715816276679, 12.931379185960404, 43.91404334248268];
pub const DOUBLE_SCROLL_IC: [f64; 3] = [0.37926545, 0.058339, -0.08167691];

/// A 3-dimensional autonomous vector field.
pub trait VectorField {
    fn deriv(&self, p: &[f64; 3]) -> Result<[f64; 3]>;
}

impl<F> VectorField for F
where
    F: Fn(&[f64; 3]) -> [f64; 3],
{
    fn deriv(&self, p: &[f64; 3]) -> Result<[f64; 3]> {
        Ok(self(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OdeSystem {
    Lorenz63 {
        sigma: f64,
        rho: f64,
        beta: f64,
    },
    DoubleScroll {
        r1: f64,
        r2: f64,
        r4: f64,
        beta: f64,
        ir: f64,
        /// Sign of the `V1/R1` term (`+1` reproduces the published form).
        #[serde(default = "plus_one")]
        self_term_sign: f64,
    },
}

fn plus_one() -> f64 {
    1.0
}

impl OdeSystem {
    pub fn lorenz63() -> Self {
        OdeSystem::Lorenz63 {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    pub fn double_scroll() -> Self {
        OdeSystem::DoubleScroll {
            r1: 1.2,
            r2: 3.44,
            r4: 0.193,
            beta: 11.6,
            ir: 2.25e-5,
            self_term_sign: 1.0,
        }
    }

    pub fn default_dt(&self) -> f64 {
        match self {
            OdeSystem::Lorenz63 { .. } => 0.01,
            OdeSystem::DoubleScroll { .. } => 0.25,
        }
    }

    pub fn default_initial(&self) -> [f64; 3] {
        match self {
            OdeSystem::Lorenz63 { .. } => LORENZ63_IC,
            OdeSystem::DoubleScroll { .. } => DOUBLE_SCROLL_IC,
        }
    }

    /// Internal RK4 substeps per recorded step used by default.
    pub fn default_substeps(&self) -> usize {
        match self {
            OdeSystem::Lorenz63 { .. } => 1,
            OdeSystem::DoubleScroll { .. } => 25,
        }
    }

    pub fn component_names(&self) -> [&'static str; 3] {
        match self {
            OdeSystem::Lorenz63 { .. } => ["x", "y", "z"],
            OdeSystem::DoubleScroll { .. } => ["V1", "V2", "I"],
        }
    }
}

impl VectorField for OdeSystem {
    fn deriv(&self, p: &[f64; 3]) -> Result<[f64; 3]> {
        match *self {
            OdeSystem::Lorenz63 { sigma, rho, beta } => Ok(lorenz63_deriv_with(p, sigma, rho, beta)),
            OdeSystem::DoubleScroll {
                r1,
                r2,
                r4,
                beta,
                ir,
                self_term_sign,
            } => {
                let [v1, v2, i] = *p;
                let dv = v1 - v2;
                let arg = beta * dv;
                if !arg.is_finite() || arg.abs() > SINH_GUARD {
                    return Err(HqrcError::numeric(format!(
                        "double-scroll sinh argument {arg} exceeds guard {SINH_GUARD}"
                    )));
                }
                let s = 2.0 * ir * arg.sinh();
                Ok([self_term_sign * v1 / r1 - dv / r2 - s, dv / r2 + s - i, v2 - r4 * i])
            }
        }
    }
}

fn lorenz63_deriv_with(p: &[f64; 3], sigma: f64, rho: f64, beta: f64) -> [f64; 3] {
    let [x, y, z] = *p;
    [sigma * (y - x), x * (rho - z) - y, x * y - beta * z]
}

/// Lorenz63 field with the standard coefficients (10, 28, 8/3).
pub fn lorenz63_deriv(p: &[f64; 3]) -> [f64; 3] {
    lorenz63_deriv_with(p, 10.0, 28.0, 8.0 / 3.0)
}

/// Double-scroll circuit field with the published parameters.
pub fn double_scroll_deriv(p: &[f64; 3]) -> Result<[f64; 3]> {
    OdeSystem::double_scroll().deriv(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    Raw,
    Normalized,
}

/// Fixed-step sequence of D-dimensional states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<Vec<f64>>,
    pub units: Units,
}

impl Trajectory {
    pub fn new(dt: f64, points: Vec<Vec<f64>>, units: Units) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(HqrcError::config(format!("time step must be positive, got {dt}")));
        }
        if let Some(d) = points.first().map(Vec::len) {
            if points.iter().any(|p| p.len() != d) {
                return Err(HqrcError::config("trajectory points differ in dimension"));
            }
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HqrcError::numeric("trajectory has non-finite entries"));
        }
        Ok(Self { dt, points, units })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Points `start..end` as a new trajectory.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            dt: self.dt,
            points: self.points[start..end].to_vec(),
            units: self.units,
        }
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[i]).collect()
    }

    /// CSV with a `t` column followed by one column per component.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[&str]) -> Result<()> {
        if names.len() != self.dim() {
            return Err(HqrcError::usage(format!(
                "{} column names for {}-dimensional trajectory",
                names.len(),
                self.dim()
            )));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        w.write_record(&header)?;
        for (k, p) in self.points.iter().enumerate() {
            let mut row = vec![format!("{}", k as f64 * self.dt)];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, names: &[&str]) -> Result<()> {
        self.write_csv(File::create(path)?, names)
    }

    /// Read a CSV written by [`Trajectory::write_csv`]; `dt` comes from the `t` column.
    pub fn read_csv<R: Read>(reader: R, units: Units) -> Result<(Self, Vec<String>)> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
            return Err(HqrcError::Serialization("trajectory CSV must start with a 't' column".into()));
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| HqrcError::Serialization(format!("bad number in trajectory CSV: {e}")))?;
            times.push(vals[0]);
            points.push(vals[1..].to_vec());
        }
        let dt = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Ok((Trajectory::new(dt, points, units)?, header[1..].to_vec()))
    }

    pub fn load_csv(path: &Path, units: Units) -> Result<(Self, Vec<String>)> {
        Self::read_csv(File::open(path)?, units)
    }
}

/// Classical fourth-order Runge–Kutta with fixed step; returns `steps + 1` points.
pub fn integrate_rk4<F: VectorField + ?Sized>(field: &F, x0: [f64; 3], dt: f64, steps: usize) -> Result<Trajectory> {
    integrate_rk4_substeps(field, x0, dt, steps, 1)
}

/// RK4 with internal step `dt / substeps`, recording one point every `dt`.
/// Stiff fields (the double scroll at `dt = 0.25`) need several substeps.
pub fn integrate_rk4_substeps<F: VectorField + ?Sized>(
    field: &F,
    x0: [f64; 3],
    dt: f64,
    steps: usize,
    substeps: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(HqrcError::config(format!("time step must be positive, got {dt}")));
    }
    if substeps == 0 {
        return Err(HqrcError::config("substep count must be positive"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(HqrcError::numeric_at("non-finite initial state", 0));
    }
    let h = dt / substeps as f64;
    let add = |a: &[f64; 3], b: &[f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0;
    points.push(x.to_vec());
    for step in 1..=steps {
        for _ in 0..substeps {
            let k1 = field.deriv(&x).map_err(|e| e.at_step(step))?;
            let k2 = field.deriv(&add(&x, &k1, h / 2.0)).map_err(|e| e.at_step(step))?;
            let k3 = field.deriv(&add(&x, &k2, h / 2.0)).map_err(|e| e.at_step(step))?;
            let k4 = field.deriv(&add(&x, &k3, h)).map_err(|e| e.at_step(step))?;
            for i in 0..3 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HqrcError::numeric_at("integration diverged", step));
        }
        points.push(x.to_vec());
    }
    Trajectory::new(dt, points, Units::Raw)
}

/// Divides by the largest absolute component of the segment it was fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub scale: f64,
}

impl Normalizer {
    pub fn fit(segment: &Trajectory) -> Result<Self> {
        if segment.is_empty() {
            return Err(HqrcError::config("cannot fit a normalizer on an empty segment"));
        }
        let scale = segment.points.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(HqrcError::config("cannot fit a normalizer on an all-zero segment"));
        }
        Ok(Self { scale })
    }

    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| v / self.scale).collect()
    }

    pub fn invert_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| v * self.scale).collect()
    }

    pub fn apply(&self, t: &Trajectory) -> Trajectory {
        Trajectory {
            dt: t.dt,
            points: t.points.iter().map(|p| self.apply_point(p)).collect(),
            units: Units::Normalized,
        }
    }

    pub fn invert(&self, t: &Trajectory) -> Trajectory {
        Trajectory {
            dt: t.dt,
            points: t.points.iter().map(|p| self.invert_point(p)).collect(),
            units: Units::Raw,
        }
    }
}
