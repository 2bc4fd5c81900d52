//! Synthetic recidivism-style records with roughly the marginals of the
//! public two-year COMPAS release. Used for fixtures and simulations when no
//! real dataset is supplied.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::{load_dataset, DatasetConfig, FeatureSchema, Subject};

const RACES: [(&str, f64); 4] = [
    ("African-American", 0.51),
    ("Caucasian", 0.34),
    ("Hispanic", 0.09),
    ("Other", 0.06),
];

/// `n` records as delimited text with the [`FeatureSchema::compas`] header.
pub fn compas_like_csv<R: Rng>(n: usize, rng: &mut R) -> String {
    let priors = Geometric::new(0.24).expect("valid probability");
    let mut out = String::from("id,sex,age,race,c_charge_degree,priors_count,two_year_recid,decile_score\n");
    for i in 0..n {
        let male = rng.random_bool(0.81);
        let age: u32 = if rng.random_bool(0.22) {
            rng.random_range(18..25)
        } else {
            rng.random_range(25..70)
        };
        let mut pick = rng.random::<f64>();
        let race = RACES
            .iter()
            .find(|(_, p)| {
                pick -= p;
                pick < 0.0
            })
            .map_or("Other", |(r, _)| r);
        let felony = rng.random_bool(0.65);
        let prior_count = priors.sample(rng).min(38);

        let risk = -0.9 + 0.18 * prior_count.min(10) as f64 + if age < 25 { 0.7 } else { 0.0 }
            - 0.012 * f64::from(age.saturating_sub(25))
            + if male { 0.25 } else { 0.0 };
        let p_recid = 1.0 / (1.0 + (-risk).exp());
        let recid = u8::from(rng.random_bool(p_recid.clamp(0.01, 0.99)));
        let score = (1.0 + 9.0 * p_recid + rng.random_range(-2.0..2.0)).round().clamp(1.0, 10.0) as u8;

        writeln!(
            out,
            "s{i},{},{age},{race},{},{prior_count},{recid},{score}",
            if male { "Male" } else { "Female" },
            if felony { "F" } else { "M" },
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// `n` encoded subjects with predictions, deterministic in `seed`.
pub fn compas_like(n: usize, seed: u64) -> Vec<Subject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let csv = compas_like_csv(n, &mut rng);
    load_dataset(csv.as_bytes(), &FeatureSchema::compas(), &DatasetConfig::default())
        .expect("synthetic records follow the schema")
}
