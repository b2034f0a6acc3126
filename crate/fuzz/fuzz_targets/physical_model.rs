#![no_main]

use castshadow::physical::{colour_feature, PhysicalParams, ShadowAppearanceModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(model) = ShadowAppearanceModel::from_text(text, PhysicalParams::default()) {
        let feature = colour_feature([60, 50, 40], [120, 100, 80]).expect("defined feature");
        let p = model.shadow_posterior(feature);
        assert!((0.0..=1.0).contains(&p) || p.is_nan());
        let _ = model.to_text();
    }
});
