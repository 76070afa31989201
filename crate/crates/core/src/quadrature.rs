//! Adaptive Simpson quadrature for one-dimensional Gaussian expectations.

use std::f64::consts::PI;

/// Half-width of the truncated standard normal support.
pub const GAUSS_WINDOW: f64 = 12.0;
pub const DEFAULT_RTOL: f64 = 1e-9;

const INITIAL_PANELS: usize = 24;
const MAX_DEPTH: u32 = 50;

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E f(N)` for standard normal `N`, integrated over `[-12, 12]`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, rtol: f64) -> f64 {
    integrate(
        |z| f(z) * std_normal_pdf(z),
        -GAUSS_WINDOW,
        GAUSS_WINDOW,
        rtol,
    )
}

/// Adaptive Simpson rule on `[a, b]` with relative tolerance `rtol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> f64 {
    let h = (b - a) / INITIAL_PANELS as f64;
    let panels: Vec<Panel> = (0..INITIAL_PANELS)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == INITIAL_PANELS {
                b
            } else {
                lo + h
            };
            Panel::new(&f, lo, hi)
        })
        .collect();
    let coarse: f64 = panels.iter().map(|p| p.whole).sum();
    let scale: f64 = panels.iter().map(|p| p.whole.abs()).sum::<f64>().max(coarse.abs());
    let tol = (rtol * scale).max(f64::MIN_POSITIVE) / INITIAL_PANELS as f64;
    panels
        .iter()
        .map(|p| refine(&f, p.a, p.b, p.fa, p.fm, p.fb, p.whole, tol, MAX_DEPTH))
        .sum()
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: simpson(a, b, fa, fm, fb),
        }
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
