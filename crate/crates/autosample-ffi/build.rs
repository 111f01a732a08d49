fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR set");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/autosample.h"));
        }
        // Keep builds working (e.g. offline docs.rs-style environments) with
        // the checked-in header.
        Err(err) => println!("cargo:warning=cbindgen skipped: {err}"),
    }
}
