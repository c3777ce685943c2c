//! Parses an inline configuration and runs the `check` task into a temporary
//! directory, the same path the binary takes.

use mfgcn::cli::{parse_config, read_ndjson, run, Task};

const CONFIG: &str = r#"
[grid]
n = 16

[noise]
sigma = 0.3
epochs = 2

[horizon]
t = 1.0

[f]
potential = "cos"
amplitude = 0.2
kernel_eigs = [0.0, 1.0]

[solver]
dt = 1e-2
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let cfg = parse_config(CONFIG)?;
    let out = std::env::temp_dir().join(format!("mfgcn-example-{}", cfg.hash()));
    let outcome = run(Task::Check, &cfg, &out)?;
    print!("{}", outcome.summary_table());
    for line in read_ndjson(&out.join("check.ndjson"))? {
        println!("{line}");
    }
    std::process::exit(outcome.exit_code());
}
