use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use tvcert::cli::{load_image, save_image, CSV_HEADER};
use tvcert::netpbm::{decode, encode, Format, Raster};

fn checkerboard_pgm(dir: &Path) -> (PathBuf, PathBuf) {
    let board = Raster {
        format: Format::P5,
        width: 16,
        height: 16,
        maxval: 255,
        samples: (0..256).map(|i| if (i % 16 / 4 + i / 64) % 2 == 0 { 230 } else { 26 }).collect(),
    };
    let hole = Raster {
        format: Format::P5,
        width: 16,
        height: 16,
        maxval: 255,
        samples: (0..256)
            .map(|i| if (6..10).contains(&(i % 16)) && (6..10).contains(&(i / 16)) { 255 } else { 0 })
            .collect(),
    };
    let (input, mask) = (dir.join("board.pgm"), dir.join("hole.pgm"));
    fs::write(&input, encode(&board)).unwrap();
    fs::write(&mask, encode(&hole)).unwrap();
    (input, mask)
}

fn tvcert(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_tvcert"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn save_load_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let files: [&[u8]; 6] = [
        b"P5\n3 2\n255\n\x00\x10\x20\x30\x40\xff",
        b"P6\n2 1\n255\n\x01\x02\x03\xfd\xfe\xff",
        b"P5\n2 1\n65535\n\x00\x01\xff\xfe",
        b"P6\n1 1\n1000\n\x00\x01\x03\xe8\x01\xf4",
        b"P2\n3 2\n15\n0 1 2\n13 14 15\n",
        b"P3\n2 1\n255\n1 2 3 253 254 255\n",
    ];
    for (k, bytes) in files.iter().enumerate() {
        let (a, b) = (dir.path().join(format!("a{k}")), dir.path().join(format!("b{k}")));
        fs::write(&a, bytes).unwrap();
        let img = load_image(&a).unwrap();
        save_image(&b, &img).unwrap();
        assert_eq!(fs::read(&b).unwrap(), *bytes, "file {k}");
        assert_eq!(load_image(&b).unwrap(), img);
    }
}

#[test]
fn decode_encode_round_trip_random_rasters() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for format in [Format::P2, Format::P3, Format::P5, Format::P6] {
        for maxval in [1u16, 255, 256, 65535] {
            let (w, h) = (r.gen_range(1..7), r.gen_range(1..7));
            let samples = (0..w * h * format.channels()).map(|_| r.gen_range(0..=maxval)).collect();
            let raster = Raster { format, width: w, height: h, maxval, samples };
            let bytes = encode(&raster);
            assert_eq!(decode(&bytes).unwrap(), raster);
            assert_eq!(encode(&decode(&bytes).unwrap()), bytes);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (input, mask) = checkerboard_pgm(dir.path());
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}.pgm"));
        let report = dir.path().join(format!("report{run}.txt"));
        let csv = dir.path().join(format!("log{run}.csv"));
        let code = tvcert(&[
            "--input", s(&input), "--mask", s(&mask), "--output", s(&out),
            "--report", s(&report), "--log-csv", s(&csv), "--seed", "3", "--no-timings",
        ]);
        assert_eq!(code, 0);
        outputs.push((fs::read(&out).unwrap(), fs::read_to_string(&report).unwrap(), fs::read(&csv).unwrap()));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    assert_eq!(a.0, b.0);
    assert_eq!(a.2, b.2);
    // only the paths differ between the two reports
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("output") && !l.starts_with("input")).map(String::from).collect::<Vec<_>>();
    assert_eq!(strip(&a.1), strip(&b.1));
    assert!(a.1.contains("status = certified"));
    assert!(String::from_utf8_lossy(&a.2).starts_with(CSV_HEADER));
}

#[test]
fn identical_invocations_give_identical_reports() {
    let dir = TempDir::new().unwrap();
    let (input, mask) = checkerboard_pgm(dir.path());
    let out = dir.path().join("out.pgm");
    let report = dir.path().join("report.txt");
    let args = [
        "--input", s(&input), "--mask", s(&mask), "--output", s(&out), "--report", s(&report),
        "--zeta", "1.5", "--random-init", "--seed", "11", "--tol", "1e-3", "--no-timings",
    ];
    assert_eq!(tvcert(&args), 0);
    let first = fs::read(&report).unwrap();
    assert_eq!(tvcert(&args), 0);
    assert_eq!(fs::read(&report).unwrap(), first);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let (input, mask) = checkerboard_pgm(dir.path());
    let out = dir.path().join("out.pgm");
    let report = dir.path().join("report.txt");
    assert_eq!(tvcert(&["--input", s(&input), "--output", s(&out), "--mu", "1"]), 1);
    assert_eq!(tvcert(&["--input", "/nonexistent.pgm", "--output", s(&out)]), 1);
    assert_eq!(tvcert(&["--input", s(&input), "--output", s(&out), "--delta-factor", "2"]), 1);
    assert_eq!(tvcert(&["--output", s(&out)]), 1);

    let small = dir.path().join("small.pgm");
    fs::write(&small, b"P5\n2 2\n255\n\x00\x00\x00\x00").unwrap();
    assert_eq!(tvcert(&["--input", s(&input), "--mask", s(&small), "--output", s(&out)]), 1);

    let garbage = dir.path().join("garbage.pgm");
    fs::write(&garbage, b"P5\n16 16\n255\n\x00").unwrap();
    assert_eq!(tvcert(&["--input", s(&garbage), "--output", s(&out)]), 1);

    // an unreachable gap with a short schedule still writes everything
    let code = tvcert(&[
        "--input", s(&input), "--mask", s(&mask), "--output", s(&out), "--report", s(&report),
        "--tol", "1e-14", "--delta-min", "1e-2",
    ]);
    assert_eq!(code, 2);
    assert!(fs::read_to_string(&report).unwrap().contains("status = gap_not_reached"));
    assert_eq!(load_image(&out).unwrap().field.width(), 16);
}

#[test]
fn denoising_without_mask() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("rgb.ppm");
    let samples = (0..4 * 4 * 3).map(|i| ((i * 37) % 256) as u16).collect();
    fs::write(&input, encode(&Raster { format: Format::P6, width: 4, height: 4, maxval: 255, samples })).unwrap();
    let out = dir.path().join("out.ppm");
    assert_eq!(tvcert(&["--input", s(&input), "--output", s(&out), "--lambda", "5"]), 0);
    let restored = decode(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(restored.format, Format::P6);
    assert_eq!((restored.width, restored.height), (4, 4));
}
