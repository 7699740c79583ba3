//! Potential profiles |V| and the perturbation W = e^{iα}J|V|.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Domain;
use crate::special::LogValue;

/// Angular factor u₀ of a power-decay profile: a constant or piecewise
/// constant on arcs `[edges[i], edges[i+1])` with `edges` running from 0 to 2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngularProfile {
    Constant(f64),
    Arcs { edges: Vec<f64>, values: Vec<f64> },
}

impl AngularProfile {
    pub fn value(&self, theta: f64) -> f64 {
        match self {
            AngularProfile::Constant(c) => *c,
            AngularProfile::Arcs { edges, values } => {
                let t = theta.rem_euclid(2.0 * PI);
                let i = edges.partition_point(|&e| e <= t).saturating_sub(1);
                values[i.min(values.len() - 1)]
            }
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            AngularProfile::Constant(c) => *c,
            AngularProfile::Arcs { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// ∫_{S¹} u₀(t)^s dt, exact for piecewise constants.
    pub fn power_integral(&self, s: f64) -> f64 {
        match self {
            AngularProfile::Constant(c) => 2.0 * PI * c.powf(s),
            AngularProfile::Arcs { edges, values } => edges
                .windows(2)
                .zip(values)
                .map(|(w, v)| (w[1] - w[0]) * v.powf(s))
                .sum(),
        }
    }

    /// Fourier coefficient (1/2π)∫ u₀(θ) e^{-idθ} dθ.
    pub fn fourier(&self, d: i64) -> Complex64 {
        match self {
            AngularProfile::Constant(c) => {
                if d == 0 {
                    Complex64::new(*c, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            AngularProfile::Arcs { edges, values } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (w, &v) in edges.windows(2).zip(values) {
                    let (a, b) = (w[0], w[1]);
                    if d == 0 {
                        acc += v * (b - a);
                    } else {
                        let df = d as f64;
                        let ea = Complex64::from_polar(1.0, -df * a);
                        let eb = Complex64::from_polar(1.0, -df * b);
                        acc += v * (ea - eb) / Complex64::new(0.0, df);
                    }
                }
                acc / (2.0 * PI)
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match self {
            AngularProfile::Constant(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::config(path, "angular profile must be finite and nonnegative"));
                }
            }
            AngularProfile::Arcs { edges, values } => {
                if edges.len() < 2 || values.len() + 1 != edges.len() {
                    return Err(Error::config(path, "arcs need n+1 edges for n values"));
                }
                if edges[0] != 0.0 || (edges[edges.len() - 1] - 2.0 * PI).abs() > 1e-12 {
                    return Err(Error::config(path, "arc edges must start at 0 and end at 2π"));
                }
                if edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config(path, "arc edges must be strictly increasing"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config(path, "arc values must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }
}

/// Behaviour of a tabulated radial profile beyond its last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Tail {
    /// Zero beyond the last sample.
    Compact,
    /// `v_last · (r/r_last)^{-m}`.
    Power { m: f64 },
    /// `v_last · exp(-μ(r^{2β} - r_last^{2β}))`.
    Gaussian { mu: f64, beta: f64 },
}

/// Nonnegative profile |V|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// u₀(θ)·(1 + r²)^{-m/2}.
    PowerDecay {
        u0: AngularProfile,
        m: f64,
    },
    /// exp(-μ r^{2β}).
    Gaussian {
        mu: f64,
        beta: f64,
    },
    /// height · 1_{r ≤ radius}.
    Disk {
        radius: f64,
        height: f64,
    },
    /// Piecewise linear in r through the samples.
    RadialTable {
        r: Vec<f64>,
        values: Vec<f64>,
        tail: Tail,
    },
    /// Samples `values[iy * nx + ix]` on a uniform Cartesian grid covering
    /// `[x_min, x_max] × [y_min, y_max]`; zero outside.
    #[serde(rename = "grid2d")]
    Grid2D {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    },
}

/// Decay class of a radial profile, with the parameters the model laws need.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelClass {
    /// u₀ r^{-m}; `u0_integral` = ∫_{S¹} u₀^{2/m}.
    A1 { m: f64, u0_integral: f64 },
    /// exp(-μ r^{2β}).
    A2 { mu: f64, beta: f64 },
    /// Compact support.
    A3,
}

/// W = e^{iα}J|V| with |V| given by `profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub alpha: f64,
    pub sign_j: i32,
    pub profile: Profile,
}

impl PotentialSpec {
    pub fn new(alpha: f64, sign_j: i32, profile: Profile) -> Self {
        Self { alpha, sign_j, profile }
    }

    /// e^{iα}J.
    pub fn coupling(&self) -> Complex64 {
        Complex64::from_polar(f64::from(self.sign_j), self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sign_j != 1 && self.sign_j != -1 {
            return Err(Error::config("potential.sign_j", "must be +1 or -1"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("potential.alpha", "must be finite"));
        }
        self.profile.validate("potential.profile")
    }
}

const STENCIL: usize = 6;

impl Profile {
    pub fn disk(radius: f64, height: f64) -> Self {
        Profile::Disk { radius, height }
    }

    pub fn power(u0: f64, m: f64) -> Self {
        Profile::PowerDecay {
            u0: AngularProfile::Constant(u0),
            m,
        }
    }

    /// Samples a profile on a Cartesian grid.
    pub fn sample_grid(&self, half_width: f64, n: usize) -> Self {
        let h = 2.0 * half_width / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                values.push(self.value(-half_width + h * ix as f64, -half_width + h * iy as f64));
            }
        }
        Profile::Grid2D {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
            nx: n,
            ny: n,
            values,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{name}"), "must be finite and strictly positive"))
            }
        };
        match self {
            Profile::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::config(format!("{path}.value"), "must be finite and nonnegative"));
                }
            }
            Profile::PowerDecay { u0, m } => {
                positive("m", *m)?;
                u0.validate(&format!("{path}.u0"))?;
            }
            Profile::Gaussian { mu, beta } => {
                positive("mu", *mu)?;
                positive("beta", *beta)?;
            }
            Profile::Disk { radius, height } => {
                positive("radius", *radius)?;
                positive("height", *height)?;
            }
            Profile::RadialTable { r, values, tail } => {
                if r.len() < 2 || r.len() != values.len() {
                    return Err(Error::config(path, "radial table needs ≥ 2 (r, value) pairs of equal length"));
                }
                if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) || !r[r.len() - 1].is_finite() {
                    return Err(Error::config(format!("{path}.r"), "radii must be finite, nonnegative, strictly increasing"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config(format!("{path}.values"), "values must be finite and nonnegative"));
                }
                match tail {
                    Tail::Compact => {}
                    Tail::Power { m } => positive("tail.m", *m)?,
                    Tail::Gaussian { mu, beta } => {
                        positive("tail.mu", *mu)?;
                        positive("tail.beta", *beta)?;
                    }
                }
            }
            Profile::Grid2D {
                x_min,
                x_max,
                y_min,
                y_max,
                nx,
                ny,
                values,
            } => {
                if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
                    return Err(Error::config(path, "grid box must be finite with max > min"));
                }
                if *nx < STENCIL || *ny < STENCIL {
                    return Err(Error::config(path, format!("grid needs at least {STENCIL} samples per axis")));
                }
                if values.len() != nx * ny {
                    return Err(Error::config(format!("{path}.values"), format!("expected {} samples", nx * ny)));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config(format!("{path}.values"), "samples must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn is_radial(&self) -> bool {
        match self {
            Profile::PowerDecay { u0, .. } => matches!(u0, AngularProfile::Constant(_)),
            Profile::Grid2D { .. } => false,
            _ => true,
        }
    }

    /// Decay exponent for the L^{p/2} integrability check, if the profile has one.
    pub fn power_exponent(&self) -> Option<f64> {
        match self {
            Profile::PowerDecay { m, .. } => Some(*m),
            Profile::RadialTable { tail: Tail::Power { m }, .. } => Some(*m),
            _ => None,
        }
    }

    pub fn model_class(&self) -> Option<ModelClass> {
        let a1 = |u0: &AngularProfile, m: f64| ModelClass::A1 {
            m,
            u0_integral: u0.power_integral(2.0 / m),
        };
        match self {
            Profile::PowerDecay { u0, m } => Some(a1(u0, *m)),
            Profile::RadialTable {
                r,
                values,
                tail: Tail::Power { m },
            } => {
                let n = r.len() - 1;
                Some(a1(&AngularProfile::Constant(values[n] * r[n].powf(*m)), *m))
            }
            Profile::Gaussian { mu, beta } | Profile::RadialTable { tail: Tail::Gaussian { mu, beta }, .. } => {
                Some(ModelClass::A2 { mu: *mu, beta: *beta })
            }
            Profile::Disk { .. } | Profile::RadialTable { tail: Tail::Compact, .. } | Profile::Grid2D { .. } => {
                Some(ModelClass::A3)
            }
            Profile::Constant { .. } => None,
        }
    }

    /// Radius beyond which the profile vanishes.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Disk { radius, .. } => Some(*radius),
            Profile::RadialTable { r, tail: Tail::Compact, .. } => Some(r[r.len() - 1]),
            Profile::Grid2D {
                x_min,
                x_max,
                y_min,
                y_max,
                ..
            } => Some(x_min.abs().max(x_max.abs()).hypot(y_min.abs().max(y_max.abs()))),
            _ => None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::PowerDecay { u0, .. } => u0.max(),
            Profile::Gaussian { .. } => 1.0,
            Profile::Disk { height, .. } => *height,
            Profile::RadialTable { values, .. } | Profile::Grid2D { values, .. } => {
                values.iter().copied().fold(0.0, f64::max)
            }
        }
    }

    /// ln U(r) for a radial profile, in sign/log form.
    pub fn radial_ln_value(&self, r: f64) -> LogValue {
        match self {
            Profile::Constant { value } => LogValue::from_f64(*value),
            Profile::PowerDecay { u0, m } => {
                LogValue::from_f64(u0.value(0.0)).scale_ln(-0.5 * m * r.mul_add(r, 1.0).ln())
            }
            Profile::Gaussian { mu, beta } => LogValue::positive(-mu * r.powf(2.0 * beta)),
            Profile::Disk { radius, height } => {
                if r <= *radius {
                    LogValue::from_f64(*height)
                } else {
                    LogValue::ZERO
                }
            }
            Profile::RadialTable { r: rs, values, tail } => {
                let last = rs.len() - 1;
                if r > rs[last] {
                    let v = LogValue::from_f64(values[last]);
                    return match tail {
                        Tail::Compact => LogValue::ZERO,
                        Tail::Power { m } => v.scale_ln(-m * (r / rs[last]).ln()),
                        Tail::Gaussian { mu, beta } => {
                            v.scale_ln(-mu * (r.powf(2.0 * beta) - rs[last].powf(2.0 * beta)))
                        }
                    };
                }
                LogValue::from_f64(table_linear(rs, values, r))
            }
            Profile::Grid2D { .. } => LogValue::from_f64(self.value(r, 0.0)),
        }
    }

    pub fn radial_value(&self, r: f64) -> f64 {
        self.radial_ln_value(r).to_f64()
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Profile::PowerDecay { u0, m } => u0.value(y.atan2(x)) * (1.0 + x * x + y * y).powf(-0.5 * m),
            Profile::Grid2D {
                x_min,
                x_max,
                y_min,
                y_max,
                nx,
                ny,
                values,
            } => {
                if x < *x_min || x > *x_max || y < *y_min || y > *y_max {
                    return 0.0;
                }
                let (wx, ix0) = lagrange_weights(x, *x_min, *x_max, *nx);
                let (wy, iy0) = lagrange_weights(y, *y_min, *y_max, *ny);
                let mut acc = 0.0;
                for (a, wya) in wy.iter().enumerate() {
                    let row = (iy0 + a) * nx;
                    let mut s = 0.0;
                    for (c, wxc) in wx.iter().enumerate() {
                        s += wxc * values[row + ix0 + c];
                    }
                    acc += wya * s;
                }
                acc
            }
            _ => self.radial_value(x.hypot(y)),
        }
    }

    /// Integration domain in ξ = b r²/2, split at kinks and support edges.
    pub fn xi_domain(&self, b: f64) -> Domain {
        let xi = |r: f64| 0.5 * b * r * r;
        match self {
            Profile::Disk { radius, .. } => Domain::interval(0.0, xi(*radius)),
            Profile::RadialTable { r, tail, .. } => {
                let mut breaks: Vec<f64> = r.iter().map(|&x| xi(x)).collect();
                if breaks[0] > 0.0 {
                    breaks.insert(0, 0.0);
                }
                Domain {
                    breaks,
                    tail: !matches!(tail, Tail::Compact),
                    // linear in r is √ξ at the origin
                    head_power: Some(2),
                }
            }
            Profile::Gaussian { beta, .. } if beta.fract() != 0.0 => {
                let p = (1..=8u32).find(|&p| (f64::from(p) * beta).fract().abs() < 1e-12).unwrap_or(8);
                Domain::half_line_graded(1.0, p)
            }
            _ => Domain::half_line(),
        }
    }

    /// Fourier coefficients Û_d(r) = (1/2π)∫ U(r,θ) e^{-idθ} dθ for
    /// d = -d_max..=d_max (index d + d_max).
    pub fn angular_fourier(&self, r: f64, d_max: usize, n_theta: usize) -> Vec<Complex64> {
        let len = 2 * d_max + 1;
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Profile::PowerDecay { u0, m } => {
                let radial = (1.0 + r * r).powf(-0.5 * m);
                (0..len).map(|i| u0.fourier(i as i64 - d_max as i64) * radial).collect()
            }
            Profile::Grid2D { .. } => {
                let samples: Vec<f64> = (0..n_theta)
                    .map(|t| {
                        let th = 2.0 * PI * t as f64 / n_theta as f64;
                        self.value(r * th.cos(), r * th.sin())
                    })
                    .collect();
                let mut out = vec![zero; len];
                if samples.iter().all(|&v| v == 0.0) {
                    return out;
                }
                // Recurrence on the unit phasors keeps this O(n_theta · d_max).
                let step: Vec<Complex64> = (0..n_theta)
                    .map(|t| Complex64::from_polar(1.0, -2.0 * PI * t as f64 / n_theta as f64))
                    .collect();
                let mut phase = vec![Complex64::new(1.0, 0.0); n_theta];
                for d in 0..=d_max {
                    let mut acc = zero;
                    for t in 0..n_theta {
                        acc += samples[t] * phase[t];
                    }
                    let c = acc / n_theta as f64;
                    out[d_max + d] = c;
                    out[d_max - d] = c.conj();
                    for t in 0..n_theta {
                        phase[t] *= step[t];
                    }
                    if d % 32 == 31 {
                        for (t, p) in phase.iter_mut().enumerate() {
                            *p = Complex64::from_polar(1.0, -2.0 * PI * ((t * (d + 1)) % n_theta) as f64 / n_theta as f64);
                        }
                    }
                }
                out
            }
            _ => {
                let mut out = vec![zero; len];
                out[d_max] = Complex64::new(self.radial_value(r), 0.0);
                out
            }
        }
    }
}

fn table_linear(rs: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= rs[0] {
        return values[0];
    }
    let i = rs.partition_point(|&x| x <= r).min(rs.len() - 1);
    let (r0, r1) = (rs[i - 1], rs[i]);
    let t = (r - r0) / (r1 - r0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Six-point Lagrange weights on a uniform axis; returns weights and the first
/// stencil index (the stencil is shifted inward at the edges).
fn lagrange_weights(x: f64, lo: f64, hi: f64, n: usize) -> ([f64; STENCIL], usize) {
    let h = (hi - lo) / (n - 1) as f64;
    let s = (x - lo) / h;
    let base = (s.floor() as isize - (STENCIL as isize / 2 - 1)).clamp(0, (n - STENCIL) as isize) as usize;
    let mut w = [1.0; STENCIL];
    for (i, wi) in w.iter_mut().enumerate() {
        let xi = (base + i) as f64;
        for k in 0..STENCIL {
            if k != i {
                let xk = (base + k) as f64;
                *wi *= (s - xk) / (xi - xk);
            }
        }
    }
    (w, base)
}
