//! Mixes two labelled scans with each operator and shows where the points
//! of each output came from.
//!
//!     cargo run --release --example mix_augment

use std::f64::consts::PI;

use lidarseg::augment::{
    apply_policy, frustummix, lasermix, polarmix_scene, AugmentPolicy, BandCount, MixAxis, MixResult, PointSource,
};
use lidarseg::ingest::{synth_scene, SynthSceneConfig};
use lidarseg::PointCloud;

fn summarize(name: &str, a: &PointCloud, b: &PointCloud, r: &MixResult) {
    let from_b = |s: &[PointSource]| s.iter().filter(|s| matches!(s, PointSource::B(_))).count();
    println!("{name}: {:?}", r.partition);
    println!(
        "  inputs {} + {} points; mixed_a {} ({} from b), mixed_b {} ({} from b)",
        a.len(),
        b.len(),
        r.mixed_a.len(),
        from_b(&r.sources_a),
        r.mixed_b.len(),
        from_b(&r.sources_b)
    );
}

fn main() -> lidarseg::Result<()> {
    let a = synth_scene(&SynthSceneConfig::default().with_seed(1))?;
    let b = synth_scene(&SynthSceneConfig::default().with_seed(2))?;

    let bands = BandCount::Choice(vec![2, 3, 4, 5, 6]);
    summarize("lasermix", &a, &b, &lasermix(&a, &b, MixAxis::Inclination, &bands, 7)?);
    summarize(
        "frustummix",
        &a,
        &b,
        &frustummix(&a, &b, MixAxis::Azimuth, &BandCount::Fixed(4), 7)?,
    );
    summarize("polarmix", &a, &b, &polarmix_scene(&a, &b, 0.75 * PI, PI / 2.0)?);

    let policy = AugmentPolicy::default();
    println!(
        "default policy:\n{}",
        toml::to_string(&policy).expect("policy serializes")
    );
    let (x, y) = apply_policy(&a, &b, &policy, 11)?;
    println!("policy output: {} + {} points", x.len(), y.len());
    Ok(())
}
