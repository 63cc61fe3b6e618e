use std::path::{Path, PathBuf};

const SCHEMES: &[&str] = &["falcon-512", "falcon-padded-512", "mceliece348864", "ml-kem-768"];

fn c_sources(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("reading {}: {e}", dir.display()))
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "c"))
        .collect();
    files.sort();
    files
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("pqclean");
    let common = root.join("common");

    // The reference code is always built optimized: unoptimized McEliece
    // keygen takes tens of seconds.
    cc::Build::new()
        .files([common.join("fips202.c"), common.join("aes.c")])
        .include(&common)
        .opt_level(3)
        .warnings(false)
        .compile("pqclean_common");

    for scheme in SCHEMES {
        let dir = root.join(scheme);
        cc::Build::new()
            .files(c_sources(&dir))
            .include(&common)
            .include(&dir)
            .opt_level(3)
            .warnings(false)
            .compile(&format!("pqclean_{}", scheme.replace('-', "_")));
    }
    println!("cargo:rerun-if-changed=pqclean");
}
