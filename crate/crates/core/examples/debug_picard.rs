use jumpopt_core::bsde::{solve_coupled_picard, PicardOptions};
use jumpopt_core::liability::TerminalLiability;
use jumpopt_core::market::{MarketCoefficients, TimeGrid};
use jumpopt_core::utility::UtilityFunction;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "merton".to_string());
    let (coeffs, utility, target) = match which.as_str() {
        "merton" => (
            MarketCoefficients::constant_diffusive(0.05, 0.2, 0.0, 0.0, 1.0),
            UtilityFunction::exponential(2.0).unwrap(),
            0.625,
        ),
        "jump" => (
            MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0),
            UtilityFunction::exponential(1.0).unwrap(),
            0.446_287_102_628_419_5,
        ),
        _ => (
            MarketCoefficients::constant_pure_jump(0.1, 0.5, 1.0, 1.0),
            UtilityFunction::mixture(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap(),
            f64::NAN,
        ),
    };
    let grid = TimeGrid::new(1.0, 25).unwrap();
    let mut options = PicardOptions::new(8_000, 6, 11, 1.0);
    options.early_stop_rel_change = None;
    let out = solve_coupled_picard(&coeffs, &utility, &TerminalLiability::Zero, &grid, &options)
        .unwrap();
    for (k, it) in out.diagnostics.iterations.iter().enumerate() {
        println!(
            "iter {k}: residual_sup {:.6e} rms {:.6e} pi_change {:.6e} floors {}/{} rank- {}",
            it.residual_sup,
            it.residual_rms,
            it.pi_change_sup,
            it.alpha_floor_hits,
            it.gamma_floor_hits,
            it.reduced_rank_steps
        );
    }
    println!("martingale ratio {:.4}", out.diagnostics.martingale_residual_ratio);
    // per-step mean/min/max of final strategy
    for (i, row) in out.strategy_values.iter().enumerate().step_by(5) {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("step {i:3}: mean {mean:.6} min {min:.6} max {max:.6} target {target:.6}");
    }
}
