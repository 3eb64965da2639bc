use serde::{Deserialize, Serialize};

use crate::beam::BeamSystem;
use crate::error::{Error, Result};

/// Element partition of `[0, total length]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    breakpoints: Vec<f64>,
}

/// How to partition each span.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// The same number of uniform elements in every span.
    Uniform(usize),
    /// Uniform elements, count given per span.
    PerSpan(Vec<usize>),
    /// Breakpoints used verbatim.
    Explicit(Vec<f64>),
}

impl Mesh {
    /// Mesh from breakpoints; they must start at 0 and increase strictly.
    pub fn from_breakpoints(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::domain("a mesh needs at least two breakpoints"));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::domain(format!("mesh must start at 0, starts at {}", breakpoints[0])));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!(
                "mesh breakpoints must increase strictly ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Mesh { breakpoints })
    }

    /// `n` equal elements on `[0, length]`.
    pub fn uniform(length: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("element count must be at least 1"));
        }
        let mut b: Vec<f64> = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        b[n] = length;
        Mesh::from_breakpoints(b)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn element(&self, j: usize) -> (f64, f64) {
        (self.breakpoints[j], self.breakpoints[j + 1])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Element containing `x`; interior breakpoints belong to the element on their right.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < 0.0 || x > self.length() {
            return None;
        }
        let n = self.n_elements();
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        Some(idx.saturating_sub(1).min(n - 1))
    }

    /// Element whose midpoint is nearest to `x` (ties resolve to the lower index).
    pub fn nearest_midpoint(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, m) in self.midpoints().into_iter().enumerate() {
            let d = (m - x).abs();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    }

    /// Mesh with additional breakpoints merged in (duplicates within a
    /// relative tolerance are dropped).
    pub fn refined_with(&self, extra: &[f64]) -> Result<Self> {
        let tol = 1e-12 * self.length();
        let mut pts: Vec<f64> = self.breakpoints.clone();
        pts.extend(extra.iter().copied().filter(|x| *x > 0.0 && *x < self.length()));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Mesh::from_breakpoints(pts)
    }
}

/// Partition a beam system; every joint of the system becomes a breakpoint.
pub fn build_mesh(system: &BeamSystem, spec: &MeshSpec) -> Result<Mesh> {
    let joints = system.joints();
    let mesh = match spec {
        MeshSpec::Uniform(n) => build_per_span(system, &vec![*n; system.spans().len()])?,
        MeshSpec::PerSpan(counts) => build_per_span(system, counts)?,
        MeshSpec::Explicit(b) => {
            let m = Mesh::from_breakpoints(b.clone())?;
            let total = system.total_length();
            if (m.length() - total).abs() > 1e-12 * total {
                return Err(Error::domain(format!(
                    "explicit mesh ends at {} but the system is {total} m long",
                    m.length()
                )));
            }
            for j in &joints {
                if !m.breakpoints.iter().any(|b| (b - j).abs() <= 1e-12 * total) {
                    return Err(Error::domain(format!("explicit mesh is missing the joint at {j} m")));
                }
            }
            m
        }
    };
    Ok(mesh)
}

fn build_per_span(system: &BeamSystem, counts: &[usize]) -> Result<Mesh> {
    let spans = system.spans();
    if counts.len() != spans.len() {
        return Err(Error::domain(format!(
            "{} element counts given for {} spans",
            counts.len(),
            spans.len()
        )));
    }
    let joints = system.joints();
    let mut b = vec![0.0];
    for (i, (&l, &n)) in spans.iter().zip(counts).enumerate() {
        if n == 0 {
            return Err(Error::domain(format!("span {i} needs at least one element")));
        }
        for k in 1..n {
            b.push(joints[i] + l * k as f64 / n as f64);
        }
        b.push(joints[i + 1]);
    }
    Mesh::from_breakpoints(b)
}
