//! Small helpers shared by the acceptance suite.

use std::fmt;
use std::time::Instant;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<16} {}", self.name, self.detail)
    }
}

/// Collects verdicts, printing each as soon as it is known.
#[derive(Default)]
pub struct Suite {
    verdicts: Vec<Verdict>,
}

impl Suite {
    pub fn run(&mut self, name: &'static str, check: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (passed, detail) = check();
        let detail = format!("{detail} [{:.1} s]", start.elapsed().as_secs_f64());
        let verdict = Verdict { name, passed, detail };
        println!("{verdict}");
        self.verdicts.push(verdict);
    }

    pub fn failures(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.passed).count()
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let cov: f64 = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = points.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    cov / var
}

/// Signed distance of `estimate` from `target` in standard errors.
pub fn z_score(estimate: f64, target: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        (estimate - target) / stderr
    } else if estimate == target {
        0.0
    } else {
        f64::INFINITY.copysign(estimate - target)
    }
}
