//! Drives the command-line front end in-process: writes a small CSV, runs
//! `select` on it and prints the score table.

fn main() {
    let dir = std::env::temp_dir().join("mpicsel-cli-example");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("toy.csv");
    let mut text = String::from("y1,y2,a,b,c\n");
    for i in 0..30 {
        let t = i as f64 / 10.0;
        text += &format!("{},{},{t},{},{}\n", 1.0 + 2.0 * t + (i as f64).sin() * 0.3, 0.5 - t + (i as f64 * 1.7).cos() * 0.3, (t * 3.1).sin(), (i % 4) as f64);
    }
    std::fs::write(&csv, text).unwrap();
    let out = dir.join("scores.csv");

    let code = mpicsel::cli::run([
        "mpicsel", "select",
        "--data", csv.to_str().unwrap(),
        "--response-cols", "y1,y2",
        "--predictor-cols", "1,a,b,c",
        "--family", "forced:0",
        "--criteria", "aic,bic,mpic-approx,mpic-normal",
        "--out", out.to_str().unwrap(),
    ]);
    println!("exit code {code}");
    print!("{}", std::fs::read_to_string(out).unwrap());
}
