//! Spot-checks the random-matrix facts behind the descent analysis.
//!
//! At initialization the net's Jacobian is well conditioned with high
//! probability once the width clears `3828 n`: its smallest singular value
//! is at least `nu sqrt(d) ||z|| / 2`, its largest at most
//! `nu (sqrt(d) + 2 sqrt(n)) ||z||`, and the first residual is at most
//! `3 ||y||`. Separately, a spectral-norm-`R` perturbation of the weights
//! flips at most `2 ceil((2 d R)^(2/3))` of the `d` hidden-unit signs.
//!
//! ```text
//! cargo run --release --example lemma_bounds
//! ```

use csdip::theory::{sign_change_bound, verify_lemmas, verify_sign_changes, SIGMA_MIN_WIDTH_FACTOR};

fn main() -> csdip::Result<()> {
    let (n, k, trials) = (2, 10, 5);
    let d = 2 * SIGMA_MIN_WIDTH_FACTOR * n;
    println!("initialization bounds at n = {n}, d = {d}, k = {k} ({trials} trials):");
    let report = verify_lemmas(n, d, k, trials, 7)?;
    println!("  smallest singular value  {}/{}", report.sigma_min_holds, report.trials);
    println!("  spectral norm            {}/{}", report.spectral_norm_holds, report.trials);
    println!("  initial residual         {}/{}", report.init_residual_holds, report.trials);

    let (d, k, radius) = (4000, 10, 0.1);
    println!("sign changes at d = {d}, k = {k}, radius = {radius} ({trials} trials):");
    let report = verify_sign_changes(d, k, radius, trials, 7)?;
    println!(
        "  ceiling {} (= {}), worst observed {}, held in {}/{}",
        report.bound,
        sign_change_bound(d, radius),
        report.max_count,
        report.holds,
        report.trials
    );
    Ok(())
}
