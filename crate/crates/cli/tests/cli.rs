use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
num_symbols = 4
fft_size = 32
cp_len = 8
pilot_symbols = 1
modulation_order = 4
code_rate = 1
channel_profile = flat_rayleigh
block_fading = true
snr_points_db = 0, 5, 10
frames_per_point = 2
max_frames_per_point = 2
num_blocks = 1
num_heads = 2
embed_dim = 8
ffn_dim = 8
iterations = 6
batch_size = 2
arch_blocks = 1, 2
arch_heads = 2
";

fn nrx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrx")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ber_sweep_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = nrx(&["ber-sweep", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,receiver,bits,bit_errors,ber,blocks,block_errors,bler,ci95");
    assert_eq!(lines.len(), 4);
}

#[test]
fn train_is_reproducible_and_checkpoint_feeds_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let ck = dir.path().join(format!("m{run}.nrx"));
        let o = nrx(&["train", "--config", &cfg, "--seed", "4", "--checkpoint", ck.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((o.stdout, fs::read(&ck).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(String::from_utf8_lossy(&outputs[0].0).starts_with("iteration,loss,bit_accuracy\n1,"));
    assert_eq!(&outputs[0].1[..4], b"NRX1");

    let neural = write(dir.path(), "n.cfg", &format!("{TINY}receiver = neural, baseline\n"));
    let ck = dir.path().join("m0.nrx");
    let o = nrx(&["ber-sweep", "--config", &neural, "--checkpoint", ck.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0,neural,"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "fft_size = lots\n");
    assert_eq!(nrx(&["ber-sweep", "--config", &bad]).status.code(), Some(2));
    let unknown = write(dir.path(), "u.cfg", "speed = 3\n");
    assert_eq!(nrx(&["ber-sweep", "--config", &unknown]).status.code(), Some(2));
    let invalid = write(dir.path(), "i.cfg", "embed_dim = 100\n");
    assert_eq!(nrx(&["train", "--config", &invalid, "--checkpoint", "x"]).status.code(), Some(2));
    let neural = write(dir.path(), "n.cfg", &format!("{TINY}receiver = neural\n"));
    let o = nrx(&["ber-sweep", "--config", &neural]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));
    assert_eq!(nrx(&["ber-sweep", "--config", "/nonexistent/file.cfg"]).status.code(), Some(2));
    assert_eq!(nrx(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn checkpoint_from_another_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY);
    let ck = dir.path().join("m.nrx");
    assert!(nrx(&["train", "--config", &cfg, "--checkpoint", ck.to_str().unwrap()]).status.success());
    let other = write(
        dir.path(),
        "o.cfg",
        &(TINY.replace("fft_size = 32", "fft_size = 16").replace("cp_len = 8", "cp_len = 4") + "receiver = neural\n"),
    );
    let o = nrx(&["ber-sweep", "--config", &other, "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fft_size"));
}

#[test]
fn format_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY);
    let junk = write(dir.path(), "junk.nrx", "not a checkpoint");
    let neural = write(dir.path(), "n.cfg", &format!("{TINY}receiver = neural\n"));
    assert_eq!(nrx(&["ber-sweep", "--config", &neural, "--checkpoint", &junk]).status.code(), Some(3));
    let img = write(dir.path(), "x.pgm", "P7 nonsense");
    let o = nrx(&["payload-eval", "--config", &cfg, "--payload", &format!("image:{img}")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset 0"));
    let o = nrx(&["payload-eval", "--config", &cfg, "--payload", "audio:/nonexistent.wav"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn payload_eval_with_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &TINY.replace("snr_points_db = 0, 5, 10", "snr_points_db = 10, inf"));
    let gps = write(dir.path(), "fix.txt", "48.8566000,2.3522000\n-33.9000000,18.4200000\n");
    let o = nrx(&["payload-eval", "--config", &cfg, "--payload", &format!("gps:{gps}")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "modality,snr_db,receiver,metric_name,metric_value");
    assert_eq!(lines[2], "gps,inf,baseline,rmse,0");
    assert!(lines[3].starts_with("gps,all,baseline,min_snr_to_sentinel,"));
}

#[test]
fn payload_eval_defaults_to_synthetic_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &TINY.replace("snr_points_db = 0, 5, 10", "snr_points_db = inf"));
    let o = nrx(&["payload-eval", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for m in ["image,inf,baseline,psnr,inf", "audio,inf,baseline,mse,0", "lidar,inf,baseline,mse,0", "radar,inf,baseline,mse,0"] {
        assert!(text.contains(m), "{m}");
    }
}

#[test]
fn arch_sweep_emits_schema_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", TINY);
    let o = nrx(&["arch-sweep", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("num_blocks,num_heads,snr_db,ber,train_final_bce\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("selected num_blocks = "));
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let o = nrx(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("layer_norm") && report.contains("end_to_end_tiny_model"));
    assert!(!report.contains("FAIL"));

    let o = nrx(&["gradcheck", "--corrupt-backward"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}
