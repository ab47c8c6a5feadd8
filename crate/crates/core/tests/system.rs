use espar_cr::beamsel_sr::sector_means_from_geometry;
use espar_cr::config::ExperimentConfig;
use espar_cr::mc_oracle::{run_trials, Estimate, ProtocolModel};
use espar_cr::optimizer::search::{solve_at_samples, Orientation, SensingCache};
use espar_cr::optimizer::Quantizer;

fn cache() -> SensingCache {
    SensingCache::new(ExperimentConfig::default().setup().unwrap()).unwrap()
}

#[test]
fn capacity_grows_as_pu_moves_away() {
    let cache = cache();
    let model = cache.setup().model.clone();
    let caps = ExperimentConfig::caps(24.0, -6.0).unwrap();
    let s = ExperimentConfig::default().solver;
    let c: Vec<f64> = (0..3)
        .map(|m_pu| {
            let o = Orientation::on_boresight(&model, 0, m_pu);
            solve_at_samples(&cache, o, &caps, Quantizer::Bits(3), &s, 118)
                .unwrap()
                .solution
                .report
                .c_lb
        })
        .collect();
    assert!(c[2] >= c[1] && c[1] >= c[0], "{c:?}");
    assert!(c[2] > c[0] * 1.01, "{c:?}");
}

#[test]
fn interference_and_power_match_simulation() {
    let cache = cache();
    let setup = cache.setup().clone();
    let caps = ExperimentConfig::caps(20.0, -6.0).unwrap();
    let o = Orientation::on_boresight(&setup.model, 0, 1);
    let n = 60;
    let p = solve_at_samples(&cache, o, &caps, Quantizer::Bits(2), &ExperimentConfig::default().solver, n).unwrap();
    let entry = cache.entry(n).unwrap();
    let dist = sector_means_from_geometry(&setup.model, setup.gamma_ss, o.phi_sr).unwrap();
    let proto = ProtocolModel {
        model: setup.model.clone(),
        prior: setup.prior,
        gamma_ss: setup.gamma_ss,
        plan: entry.plan,
        eta: entry.detector.eta,
        phi_sr: o.phi_sr,
        m_pu: o.m_pu,
        rho: 4.0,
    };
    let run = run_trials(&proto, &dist, &p.solution.policy, p.state.d_t, 400_000, 17).unwrap();
    let r = &p.solution.report;
    let close = |e: &Estimate, v: f64| (e.mean - v).abs() <= (0.02 * v).max(4.0 * e.std_err);
    assert!(close(&run.interference, r.interference_used), "{:?} vs {}", run.interference, r.interference_used);
    assert!(close(&run.power, r.power_used), "{:?} vs {}", run.power, r.power_used);
    assert!(run.capacity.mean + 4.0 * run.capacity.std_err >= r.c_lb);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ExperimentConfig::from_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
    let full = ExperimentConfig::from_file(&dir.join("default.toml")).unwrap();
    assert_eq!(full, ExperimentConfig::default());
}
