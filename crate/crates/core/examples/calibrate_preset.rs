//! Calibrates the frozen `paper-noise` preset.
//!
//! Runs every bracketed recipe under a candidate noise model and prints the
//! headline numbers next to their target ranges. The values in
//! `presets/paper-noise.toml` were chosen with this program and are not
//! refitted anywhere else.
//!
//! ```text
//! cargo run --release -p spinwave-core --example calibrate_preset -- \
//!     [rabi_sigma] [larmor_sigma_rad_s] [background] [misalignment_rad] [seed]
//! ```

use std::time::Instant;

use spinwave::control::NoiseModel;
use spinwave::experiment::{run_fringe, run_prepare_six, run_qpt_gates, run_rotation_sweep, ExperimentConfig, Recipe};

fn main() -> spinwave::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let preset = spinwave::experiment::NoisePreset::by_name("paper-noise")?;
    let n = preset.noise;
    let noise = NoiseModel {
        rabi_fractional_sigma: *args.first().unwrap_or(&n.rabi_fractional_sigma),
        larmor_sigma: *args.get(1).unwrap_or(&n.larmor_sigma),
        background_rate: *args.get(2).unwrap_or(&n.background_rate),
        idler_misalignment_rad: *args.get(3).unwrap_or(&n.idler_misalignment_rad),
    };
    let seed = args.get(4).map(|s| *s as u64).unwrap_or(2014);
    println!("{noise:?} seed {seed}");

    let cfg = |recipe| {
        let mut c = ExperimentConfig::new(recipe, seed);
        c.preset = None;
        c.noise = Some(noise);
        c.control.rabi_hz = preset.rabi_hz;
        c.control.aux_coupled = Some(preset.aux_coupled);
        c
    };

    let t = Instant::now();
    let six = run_prepare_six(&cfg(Recipe::PrepareSix))?;
    println!(
        "prepare_six      {:.4}  [0.95, 0.99]   ({:.1?})",
        six.mean_fidelity,
        t.elapsed()
    );

    let t = Instant::now();
    let sweep = run_rotation_sweep(&cfg(Recipe::RotationSweep))?;
    for c in &sweep.curves {
        println!("rotation_{}       {:.4}  [0.97, 0.999]", c.axis.name(), c.mean_fidelity);
    }
    let arb = run_rotation_sweep(&cfg(Recipe::ArbitraryAxis))?;
    println!(
        "arbitrary_axis   {:.4}  [0.96, 0.999]  ({:.1?})",
        arb.curves[0].mean_fidelity,
        t.elapsed()
    );

    let t = Instant::now();
    let qpt = run_qpt_gates(&cfg(Recipe::QptGates))?;
    for g in &qpt.gates {
        println!(
            "  {:<8} F_proc {:.4}  F_ave formula {:.4} measured {:.4} mc {:.4}",
            g.gate,
            g.process_fidelity,
            g.average_fidelity_formula,
            g.average_fidelity_measured,
            g.average_fidelity_monte_carlo.mean
        );
    }
    println!(
        "qpt_gates        {:.4}  [0.90, 0.99]   ({:.1?})",
        qpt.mean_process_fidelity,
        t.elapsed()
    );

    let t = Instant::now();
    let fringe = run_fringe(&cfg(Recipe::Fringe))?;
    println!(
        "fringe ratio     {:.2}  > 6  visibility {:.4}  ({:.1?})",
        fringe.min_max_min_ratio,
        fringe.mean_visibility,
        t.elapsed()
    );
    Ok(())
}
