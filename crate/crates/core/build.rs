fn main() {
    // OpenBLAS bundles LAPACK; the reference liblapack stays as a fallback.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
