//! The decay certificate on synthetic series shaped like a two-sided
//! boundary layer, in finite-horizon and discounted form.

use mfgcn::diagnostics::{certificate_check, default_lambda_grid, CertificateMode};

fn main() -> mfgcn::Result<()> {
    let horizon = 6.0;
    let t: Vec<f64> = (0..=120).map(|i| i as f64 * 0.05).collect();
    let layer: Vec<f64> = t.iter().map(|s| (-s).exp() + (-(horizon - s)).exp()).collect();
    for mode in [CertificateMode::Finite, CertificateMode::Discounted { delta: 0.1 }] {
        let rep = certificate_check(&t, &layer, &layer, &layer, mode, &default_lambda_grid())?;
        println!("{mode:?}: C0 {:.3}, lambda {:.2}, holds {}", rep.c0, rep.lambda, rep.holds);
        for h in &rep.hypotheses {
            println!("  {:3} needs C0 >= {:.3}, margin {:+.3}", h.name, h.required_c0, h.margin);
        }
        println!("  conclusion rate {:.3}, constant {:.3}", rep.conclusion_rate, rep.conclusion_constant);
    }
    Ok(())
}
