//! Write the built-in prompt variants as JSON files, one per variant.
//! Useful as a starting point for authoring custom variants:
//!
//! ```bash
//! cargo run --example export_variants -- data/variants
//! ```

use cape_core::prompt::{builtin, variant_to_json};

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/variants".to_string());
    std::fs::create_dir_all(&dir)?;
    for variant in builtin::all() {
        let path = format!("{dir}/{}.json", variant.variant_id);
        std::fs::write(&path, variant_to_json(&variant))?;
        println!("wrote {path}");
    }
    Ok(())
}
