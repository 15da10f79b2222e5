use proptest::prelude::*;
use sectorflow_core::barrier::{self, BarrierState, TStarMode};
use sectorflow_core::diagnostics::{self, SampleView};
use sectorflow_core::onedim::{self, Profile1D};
use sectorflow_core::scenario::{self, MeshSpec};
use sectorflow_core::Params;

struct S {
    t: f64,
    strip: Vec<[f64; 2]>,
}

impl SampleView for S {
    fn t(&self) -> f64 {
        self.t
    }
    fn omega_max(&self) -> f64 {
        self.strip.last().map(|s| s[1]).unwrap_or(0.0)
    }
    fn n1(&self) -> f64 {
        0.0
    }
    fn n2(&self) -> f64 {
        0.0
    }
    fn strip(&self) -> &[[f64; 2]] {
        &self.strip
    }
}

fn series(values: &[f64]) -> Vec<S> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| S { t: 0.1 * i as f64, strip: vec![[0.5, v], [2.0, 2.0 * v]] })
        .collect()
}

fn demo() -> Params {
    Params {
        alpha: 1.0,
        p0: 0.013476091488152233,
        p1: 0.9865239085118478,
        phi0: 0.1,
        phi1: 349.51113954234665,
        delta: 0.125,
        b0: 0.0625,
        mcap: 174.80556977117334,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bkm_is_monotone_in_k_and_additive(vals in prop::collection::vec(0.0..10.0f64, 3..20), split in 1usize..19) {
        let s = series(&vals);
        let lo = diagnostics::bkm_integral(&s, 1.0).unwrap();
        let hi = diagnostics::bkm_integral(&s, 3.0).unwrap();
        prop_assert!(hi >= lo);
        let cut = split.min(s.len() - 1);
        let a = diagnostics::bkm_integral(&s[..=cut], 3.0).unwrap();
        let b = diagnostics::bkm_integral(&s[cut..], 3.0).unwrap();
        prop_assert!((a + b - hi).abs() <= 1e-12 * (1.0 + hi));
    }

    #[test]
    fn unit_constant_is_the_only_zero_of_the_residual(c in 0.0..3.0f64) {
        let g = onedim::log_grid(0.01, 100.0, 200);
        let r = onedim::steady_residual(&g, c).unwrap();
        if (c - 1.0).abs() > 1e-6 {
            prop_assert!(r > 0.0);
        }
        prop_assert!((r - (c - 1.0).abs() * 100.0).abs() <= 1e-10 * (1.0 + r));
    }

    #[test]
    fn power_law_velocity_is_exact(e in -1.5..-0.2f64, x in 0.5..5.0f64) {
        let grid = onedim::log_grid(0.5, 50.0, 100_000);
        let p = Profile1D::sample(grid, |y| y.powf(e), |_| 1.0).unwrap();
        let u = onedim::velocity_1d(&p, x, Some(e)).unwrap();
        let exact = x.powf(e + 1.0) / e;
        prop_assert!((u - exact).abs() <= 1e-6 * exact.abs(), "{u} {exact}");
    }
}

#[test]
fn prepared_data_is_controlled_at_time_zero() {
    let p = demo();
    let f = scenario::build_initial_data(&p, &MeshSpec { nx: 48, ny: 24 }).unwrap();
    let kappa = barrier::kappa(&p, TStarMode::ControlTheorem).unwrap();
    let b = BarrierState::at(&p, kappa, 0.0).unwrap();
    let r = diagnostics::check_control(&f, &b, &p);
    assert!(r.holds());
    assert_eq!(r.violations(), 0);
    assert!(r.inspected > 0);
    assert!(r.lines.iter().all(|l| l.worst_margin > 0.0));
}

#[test]
fn a_spike_is_reported_with_its_location() {
    let p = demo();
    let mut f = scenario::build_initial_data(&p, &MeshSpec { nx: 48, ny: 24 }).unwrap();
    let kappa = barrier::kappa(&p, TStarMode::ControlTheorem).unwrap();
    let b = BarrierState::at(&p, kappa, 0.0).unwrap();
    let k = f.markers.iter().position(|m| m.position[0] > 1.2 && m.position[0] < 1.9 && b.contains(m.position)).unwrap();
    f.markers[k].omega = 2.0 * p.phi1;
    let r = diagnostics::check_control(&f, &b, &p);
    let line = r.line(diagnostics::CTRL_UPPER_CONST).unwrap();
    assert!(!line.holds);
    assert_eq!(line.worst_marker, Some(k));
    assert_eq!(r.witnesses.len(), 1);
    assert_eq!(r.witnesses[0].x1, f.markers[k].position[0]);
}

#[test]
fn vacuous_region_passes() {
    let p = demo();
    let f = scenario::build_initial_data(&p, &MeshSpec { nx: 24, ny: 12 }).unwrap();
    let b = BarrierState { t: 0.0, b: 0.0, b0: p.b0, alpha: p.alpha, delta: p.delta };
    let mut far = f.clone();
    for m in &mut far.markers {
        m.position[1] += 100.0;
    }
    let r = diagnostics::check_control(&far, &b, &p);
    assert_eq!(r.inspected, 0);
    assert!(r.holds());
}
