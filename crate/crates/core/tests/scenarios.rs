use std::fs;
use std::path::Path;

use cmeasure::config::parse_config;
use cmeasure::intensity::IntensitySpec;

#[test]
fn shipped_scenarios_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = parse_config(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_config(&cfg.to_toml().unwrap()).unwrap(), cfg);
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn linear_sde_table_parses() {
    let doc = r#"
horizon = 1.0
n_paths = 10
seed = 0

[lambda]
family = "constant"
rates = [1.0, 1.0]

[mu]
family = "linear_sde"
x0 = [1.0, 0.5]
link = { kind = "relu" }
drift = { kind = "constant", value = [0.0, 0.0] }
feedback = { kind = "constant", matrix = [[-1.0, 0.0], [0.0, -1.0]] }
diffusion = { kind = "diagonal", values = [0.3, 0.3] }
"#;
    let cfg = parse_config(doc).unwrap();
    assert!(matches!(cfg.mu, IntensitySpec::LinearSde(_)));
    assert_eq!(cfg.mu.dimension(), 2);
}

#[test]
fn hawkes_table_parses() {
    let doc = r#"
horizon = 2.0
n_paths = 10
seed = 0

[lambda]
family = "constant"
rates = [1.0]

[mu]
family = "hawkes"
links = [{ kind = "clipped_linear", slope = 1.0, cap = 3.0 }]
kernels = [[{ kind = "box", level = 0.4, support = 0.5 }]]
baseline = [1.0]

[options]
bases = [1.0, 2.0]
statistic = "mean_count"
"#;
    let cfg = parse_config(doc).unwrap();
    assert_eq!(cfg.options.bases, Some((1.0, 2.0)));
}
