mod common;

use common::{linspace, oracle_stock_price, table};
use lambert_indiff::analysis::{bounds_at, uniform_lower_bounds};
use lambert_indiff::decomposition::{
    stock_bounds, stock_decomposition, stock_price_quadrature, stock_ratio_bounds,
    value_ratio_bounds,
};
use lambert_indiff::pricing::value_from_price;
use lambert_indiff::taylor::{taylor_coefficients, taylor_price, CoefficientForm};
use lambert_indiff::{McConfig, Preset};

const RHOS: [f64; 9] = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8];

#[test]
fn oracle_reduces_to_lognormal_mean_for_tiny_risk_aversion() {
    let (m, mut a) = table(Preset::Table1, 0.5);
    a.gamma = 1e-9;
    let p = oracle_stock_price(&m, &a, 0.0);
    let mean = a.lambda * m.discount() * m.s0 * (m.nu * m.maturity).exp();
    assert!((p / mean - 1.0).abs() < 1e-6);
}

#[test]
fn lambert_quadrature_matches_oracle() {
    for preset in [Preset::Table1, Preset::Table3] {
        for gamma in [0.5, 4.0, 15.0] {
            let (m, a) = table(preset, gamma);
            for rho in RHOS {
                let oracle = oracle_stock_price(&m, &a, rho);
                let lam = stock_price_quadrature(&m, &a, rho).unwrap();
                assert!(
                    (lam / oracle - 1.0).abs() < 1e-8,
                    "{preset} γ={gamma} ρ={rho}: {lam} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn ratio_sandwich() {
    for preset in [Preset::Table1, Preset::Table3] {
        for gamma in [0.5, 4.0, 15.0] {
            let (m, a) = table(preset, gamma);
            for rho in RHOS {
                let p = oracle_stock_price(&m, &a, rho);
                let b = stock_bounds(&m, &a, rho).unwrap();
                let r = stock_ratio_bounds(&m, &a, rho).unwrap();
                let tag = format!("{preset} γ={gamma} ρ={rho}");
                assert!(r.lower_e <= r.lower_w, "{tag}");
                assert!(r.lower_w <= b.d / p && b.d / p <= 1.0, "{tag}");
                assert!(1.0 <= b.g / p && b.g / p <= r.upper_w, "{tag}");
                assert!(r.upper_w <= r.upper_e, "{tag}");
            }
        }
    }
}

#[test]
fn residual_below_its_bound() {
    for gamma in [0.5, 4.0, 15.0] {
        let (m, a) = table(Preset::Table1, gamma);
        for rho in RHOS {
            let b = stock_bounds(&m, &a, rho).unwrap();
            let residual = oracle_stock_price(&m, &a, rho) - b.d;
            assert!(residual >= 0.0 && residual <= b.b, "γ={gamma} ρ={rho}");
        }
    }
}

#[test]
fn value_ratio_bounds_hold() {
    for preset in [Preset::Table1, Preset::Table3] {
        let (m, a) = table(preset, 0.5);
        for rho in RHOS {
            let p = oracle_stock_price(&m, &a, rho);
            let b = stock_bounds(&m, &a, rho).unwrap();
            let v = value_from_price(&m, &a, p).unwrap();
            let vd = value_from_price(&m, &a, b.d).unwrap();
            let vg = value_from_price(&m, &a, b.g).unwrap();
            // Ratios from log-magnitudes, robust to underflow.
            let vd_over_v = (vd.log_magnitude - v.log_magnitude).exp();
            let vg_over_v = (vg.log_magnitude - v.log_magnitude).exp();
            let rb = value_ratio_bounds(&m, &a, rho).unwrap();
            let tag = format!("{preset} ρ={rho}");
            assert!(1.0 <= vd_over_v && vd_over_v <= rb.vd_over_v_max * (1.0 + 1e-12), "{tag}");
            assert!(rb.vg_over_v_min <= vg_over_v * (1.0 + 1e-12) && vg_over_v <= 1.0, "{tag}");
        }
    }
}

#[test]
fn bounds_are_bounded_and_stable_under_refinement() {
    let (m, a) = table(Preset::Table1, 0.5);
    let sup = |n: usize| {
        linspace(-0.999, 0.999, n)
            .into_iter()
            .map(|r| bounds_at(&m, &a, r).unwrap())
            .fold([0.0f64; 3], |acc, b| [acc[0].max(b.d), acc[1].max(b.b), acc[2].max(b.g)])
    };
    let coarse = sup(1999);
    let fine = sup(3997);
    for k in 0..3 {
        assert!(coarse[k].is_finite());
        assert!((fine[k] / coarse[k] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn uniform_floor_below_quadrature_price() {
    let (m, a) = table(Preset::Table1, 0.5);
    let floor = uniform_lower_bounds(&m, &a).unwrap();
    for rho in linspace(-0.999, 0.999, 41) {
        assert!(oracle_stock_price(&m, &a, rho) >= floor.p_floor, "ρ={rho}");
        let v = value_from_price(&m, &a, oracle_stock_price(&m, &a, rho)).unwrap();
        assert!(v.value >= floor.v_floor);
    }
}

#[test]
fn taylor_slope_at_perfect_correlation() {
    let (m, a) = table(Preset::Table1, 0.5);
    let c = taylor_coefficients(&m, &a, CoefficientForm::Corrected).unwrap();
    let (rho, h) = (1.0 - 1e-4, 1e-5);
    let fd = (oracle_stock_price(&m, &a, rho + h) - oracle_stock_price(&m, &a, rho - h)) / (2.0 * h);
    // d/dρ Σ c_k (1-ρ)^k at ρ = 1 is -c₁.
    assert!((fd / -c.c[1] - 1.0).abs() < 0.01, "fd {fd}, c1 {}", c.c[1]);
}

#[test]
fn taylor_fails_away_from_perfect_correlation() {
    let (m, a) = table(Preset::Table1, 0.5);
    let c = taylor_coefficients(&m, &a, CoefficientForm::Corrected).unwrap();
    let worst = linspace(-0.5, 0.5, 101)
        .into_iter()
        .map(|r| {
            let p = oracle_stock_price(&m, &a, r);
            (taylor_price(&c, r, 4).unwrap() - p).abs() / p
        })
        .fold(0.0, f64::max);
    assert!(worst > 0.10, "worst relative deviation {worst}");
}

#[test]
fn taylor_inside_lambert_interval_near_one() {
    let (m, a) = table(Preset::Table1, 0.5);
    let c = taylor_coefficients(&m, &a, CoefficientForm::Corrected).unwrap();
    let lam = stock_decomposition(&m, &a, 0.99, &McConfig::new(10_000, 11)).unwrap();
    let t = taylor_price(&c, 0.99, 4).unwrap();
    assert!(lam.price.contains(t), "taylor {t}, CI {:?}", lam.price.ci99);
}

#[test]
fn order_zero_is_the_upper_boundary_limit() {
    let (m, a) = table(Preset::Table1, 0.5);
    let c = taylor_coefficients(&m, &a, CoefficientForm::Corrected).unwrap();
    let lim = lambert_indiff::decomposition::boundary_limits(&m, &a).unwrap();
    assert!((taylor_price(&c, 0.3, 0).unwrap() / lim.g_at_plus_one - 1.0).abs() < 1e-14);
    let near = bounds_at(&m, &a, 1.0 - 1e-9).unwrap();
    assert!((near.g / lim.g_at_plus_one - 1.0).abs() < 1e-6);
    assert!((near.d / lim.d_at_plus_one - 1.0).abs() < 1e-6);
}
