//! Minimal end-to-end usage: build a spec, propagate it exactly, and read
//! off the decoherence rate.  Mirrors the README example.

use fluxspin::analysis::extract_spectral;
use fluxspin::propagator::{build_generator, initial_joint_state, Occupation};
use fluxspin::{FluctuatorSpec, Vec3};

fn main() -> fluxspin::Result<()> {
    // Two-state chain: rates 1.0 each way, conditional fields +-0.3 z-hat.
    let spec = FluctuatorSpec::two_state(
        1.0,
        1.0,
        Vec3::EZ.scale(0.3),
        Vec3::EZ.scale(-0.3),
    );
    let generator = build_generator(&spec)?;
    let s0 = initial_joint_state(&spec, Vec3::EX, &Occupation::Stationary)?;

    // Exact propagation...
    let states = generator.propagate(&s0, &[0.5, 1.0, 2.0])?;
    println!("bloch at t=1: {:?}", states[1].reduced_bloch());

    // ...and the decoherence rate of the slowest coherent mode.
    let rate = extract_spectral(&generator, &s0)?;
    println!("gamma = {:.4} /us", rate.gamma_decay);
    Ok(())
}
