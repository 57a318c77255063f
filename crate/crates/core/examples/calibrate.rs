//! Scratch calibration runs for quadrature sizes and cutoff choices.

use mattila_lab::config_map::ConfigMap;
use mattila_lab::fourier::FrequencyBallOptions;
use mattila_lab::group::{AxisWindow, ChartBump, GroupWindow};
use mattila_lab::identity::*;
use mattila_lab::mollify::Mollifier;
use mattila_lab::presets;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "probe" => probe(),
        "polar" => polar(),
        "verify" => verify(),
        "sl2decay" => sl2decay(),
        _ => eprintln!("usage: calibrate [probe|polar|verify|sl2decay]"),
    }
}

fn probe() {
    let window = GroupWindow::<f64>::sl2_default();
    let rungs: Vec<f64> = (3..=6).map(|m| 2f64.powi(m)).collect();
    for (shrink, margin) in [(0.2, 0.3), (0.4, 0.35), (0.6, 0.4)] {
        let psi = ChartBump::sl2_interior(2.0, shrink, margin);
        for nodes in [64usize * 64 * 64] {
            for regime in [ProbeRegime::Critical, ProbeRegime::OffCritical] {
                let t0 = std::time::Instant::now();
                let curve =
                    oscillatory_ensemble_decay(&window, &psi, &rungs, 32, nodes, regime, 11)
                        .unwrap();
                println!(
                    "shrink={shrink} margin={margin} nodes={nodes} {regime:?}: slope {:+.3}  pts {:?}  ({:?})",
                    curve.slope,
                    curve.points.iter().map(|p| format!("{:.3e}", p.1)).collect::<Vec<_>>(),
                    t0.elapsed()
                );
            }
        }
    }
}

fn polar() {
    let m = Mollifier::<f64>::triangular(2, 2f64.powi(-6)).unwrap();
    let bump = presets::TriangleBumpDensity::<f64>::new(vec![0.1, -0.2], 0.5);
    let two_atom = presets::two_atom::<f64>(&[0.0, 0.0], &[0.7, 0.3]).unwrap();
    let dust = presets::cantor_dust::<f64>(3).unwrap();
    let params = PolarCompareParams::default();
    let t0 = std::time::Instant::now();
    let r1 = polar_mattila_compare(&bump, &m, 32.0, params).unwrap();
    let r2 = polar_mattila_compare(&two_atom, &m, 32.0, params).unwrap();
    let r3 = polar_mattila_compare(&dust, &m, 32.0, params).unwrap();
    for (name, r) in [("bump", &r1), ("two-atom", &r2), ("dust3", &r3)] {
        println!(
            "{name}: polar {:.5}, group {:.5}, ratio {:.5} (2pi = {:.5})  err {:+.2}%",
            r.polar,
            r.group.value,
            r.ratio,
            std::f64::consts::TAU,
            (r.ratio / std::f64::consts::TAU - 1.0) * 100.0
        );
    }
    println!("elapsed {:?}", t0.elapsed());
}

fn verify() {
    let eps: Vec<f64> = (4..=6).map(|m| 2f64.powi(-m)).collect();
    let params = VerifyParams::default();

    let cloud = presets::uniform_square_cloud::<f64>(64, 2024).unwrap();
    let t0 = std::time::Instant::now();
    let reports = verify_identity(
        &ConfigMap::Distance { dim: 2 },
        &[&cloud, &cloud],
        &GroupWindow::Orthogonal2,
        &eps,
        VerifyParams { freq_radius: 64.0, ..params },
        5,
    )
    .unwrap();
    for r in &reports {
        println!(
            "distance eps={:.5}: lhs {:.4} rhs {:.4} (se {:.4}) ratio {:.4}",
            r.epsilon, r.lhs.value, r.rhs.value, r.rhs.stderr, r.ratio
        );
    }
    println!("distance elapsed {:?}", t0.elapsed());

    let e = presets::circle_cloud::<f64>(32, 0.8).unwrap();
    let f = presets::uniform_square_cloud::<f64>(12, 7).unwrap();
    let h = presets::uniform_square_cloud::<f64>(12, 8).unwrap();
    let fh = mattila_lab::measure::convolve(&f, &h).unwrap();
    let t0 = std::time::Instant::now();
    let reports = verify_identity(
        &ConfigMap::SignedArea,
        &[&e, &fh],
        &GroupWindow::sl2_default(),
        &eps,
        VerifyParams { n_group: 4096, ..params },
        6,
    )
    .unwrap();
    for r in &reports {
        println!(
            "signed-area eps={:.5}: lhs {:.4} rhs {:.4} (se {:.4}) ratio {:.4}",
            r.epsilon, r.lhs.value, r.rhs.value, r.rhs.stderr, r.ratio
        );
    }
    println!("signed-area elapsed {:?}", t0.elapsed());

    let dust = presets::cantor_dust::<f64>(3).unwrap();
    let slots = [&dust, &dust, &dust, &dust];
    let t0 = std::time::Instant::now();
    let reports = verify_identity(
        &ConfigMap::ProductOfDistances { dim: 2, factors: 2 },
        &slots,
        &GroupWindow::DilationBlock { factors: 2, block_dim: 2, half_width: (2.0f64).ln() },
        &eps,
        VerifyParams { n_group: 192, freq_radius: 32.0, ..params },
        7,
    )
    .unwrap();
    for r in &reports {
        println!(
            "prod-dist eps={:.5}: lhs {:.4} rhs {:.4} (se {:.4}) ratio {:.4}",
            r.epsilon, r.lhs.value, r.rhs.value, r.rhs.stderr, r.ratio
        );
    }
    println!("prod-dist elapsed {:?}", t0.elapsed());
}

fn sl2decay() {
    let window = GroupWindow::<f64>::sl2_default();
    let psi = ChartBump {
        axes: vec![
            None,
            Some(AxisWindow::new(0.6, 1.9, 0.3)),
            Some(AxisWindow::new(-1.7, 1.7, 0.5)),
        ],
    };
    let rungs: Vec<f64> = (3..=6).map(|m| 2f64.powi(m)).collect();
    let grid = presets::uniform_grid_1d::<f64>(256).unwrap();
    let square = mattila_lab::fourier::ProductPower::new(&grid, 2);
    let t0 = std::time::Instant::now();
    let curve = sl2_average_decay(&square, &window, &psi, &rungs, 4096, 4, 3).unwrap();
    println!("square cloud slope {:+.3} pts {:?} ({:?})", curve.slope, curve.points, t0.elapsed());

    let cantor = presets::cantor_middle_thirds::<f64>(6).unwrap();
    let dust = mattila_lab::fourier::ProductPower::new(&cantor, 2);
    let t0 = std::time::Instant::now();
    let curve = sl2_average_decay(&dust, &window, &psi, &rungs, 4096, 4, 3).unwrap();
    println!("dust slope {:+.3} pts {:?} ({:?})", curve.slope, curve.points, t0.elapsed());

    let delta = mattila_lab::measure::PointMassMeasure::<f64>::dirac(&[0.2, 0.1]).unwrap();
    let curve = sl2_average_decay(&delta, &window, &psi, &rungs, 2048, 4, 3).unwrap();
    println!("dirac slope {:+.3}", curve.slope);

    let _ = FrequencyBallOptions::default();
}
