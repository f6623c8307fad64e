use uniexp::config::{Command, ExperimentConfig};
use uniexp::runner::{config_from_report, run};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn report_config_block_round_trips() {
    let c = config(
        "command=equidist\nmeasure=preset:translations(alpha=0.41421356,beta=0.73205081)\norbit_len=2000\nmaster_seed=17\nworkers=3",
    );
    let out = run(&c).unwrap();
    let back = config_from_report(&out.report).unwrap();
    // execution-only keys are not part of the report
    assert_eq!(back.workers, 1);
    assert_eq!(back.to_text().replace("workers=1", "workers=3"), c.to_text());
    assert_eq!(back.hash(), c.hash());
    assert_eq!(out.report["config_hash"], c.hash());
    assert_eq!(out.report["master_seed"], 17);
}

#[test]
fn every_command_runs_and_is_worker_independent() {
    let cases = [
        "command=verify\nmeasure=preset:symmetric(alpha=0.41421356,beta=0.73205081,a=4,b=4)\nnx=3\nny=3\nntheta=8\nN_max=2\nmode=mc\nsamples=200\ncertify=true",
        "command=scan-n\nmeasure=preset:dirac(word=CAT)\nnx=2\nny=2\nntheta=16\nN_max=2",
        "command=lyapunov\nmeasure=preset:diffusion(f0=CAT,eps=0.1)\nn_steps=5000",
        "command=stable\nmeasure=preset:dirac(word=CAT)\nn=40",
        "command=nonrandom\nmeasure=preset:diffusion(f0=CAT,eps=0.1)\nn=50\nn_omegas=5",
        "command=defect\nmeasure=preset:generators(alpha=0.41421356,beta=0.73205081,a=0.5,b=0.5)\ndegree=1\ntest_points=32\nstarts=3",
        "command=orbit\nmeasure=preset:dirac(word=G1(0.25))\norbit_len=100",
        "command=equidist\nmeasure=preset:diffusion(f0=CAT,eps=0.1)\norbit_len=5000",
        "command=smoothing\nmeasure=preset:diffusion(f0=ID,eps=0.1,n_quad=8)\nsamples=5000",
    ];
    let mut seen = Vec::new();
    for text in cases {
        let one = run(&config(&format!("{text}\nworkers=1\nmaster_seed=9"))).unwrap();
        let eight = run(&config(&format!("{text}\nworkers=8\nmaster_seed=9"))).unwrap();
        assert_eq!(one.json, eight.json, "{text}");
        assert_eq!(one.exit_code, 0);
        seen.push(one.command);
    }
    assert_eq!(seen, Command::ALL.to_vec());
}

#[test]
fn orbit_verdicts() {
    let out = run(&config(
        "command=orbit\nmeasure=preset:dirac(word=G1(0.25))\norbit_len=100\nexpect=finite",
    ))
    .unwrap();
    assert_eq!(out.verdict, "finite");
    assert_eq!(out.report["result"]["orbit"]["size"], 4);
    assert_eq!(out.exit_code, 0);
}

#[test]
fn files_follow_formats() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("sub/run");
    let out = run(&config(&format!(
        "command=smoothing\nmeasure=preset:diffusion(f0=ID,eps=0.1,n_quad=8)\nsamples=2000\nformats=svg,json\noutput={}",
        prefix.display()
    )))
    .unwrap();
    let names: Vec<String> = out
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["run.report.json", "run.heatmap.svg"]);
    let svg = std::fs::read_to_string(prefix.with_extension("heatmap.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 64 * 64);
}
