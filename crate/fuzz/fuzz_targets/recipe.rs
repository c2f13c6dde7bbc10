#![no_main]

use libfuzzer_sys::fuzz_target;
use mcissa::{generate, SignalRecipe};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(recipe) = SignalRecipe::from_toml_str(text) {
        if recipe.components.len() <= 16 {
            let _ = generate(&recipe, 2, 16);
        }
    }
});
