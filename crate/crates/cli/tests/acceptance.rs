//! Acceptance suite. Each criterion prints one PASS/FAIL line; run with
//! `cargo test -p pixel-ldp-cli --test acceptance -- --nocapture` to see them.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pixel_ldp::imageio::{read_image, write_image, AlphaPolicy};
use pixel_ldp::verify::{
    certify_planes, certify_randomizer, monotone_psnr_sweep, plane_claims, synthetic_scene,
    DEFAULT_CONFIDENCE,
};
use pixel_ldp::wavelet::Matrix;
use pixel_ldp::{
    allocate, blocklevel_to_pixel_epsilon, exact_tv_reduced, haar_dwt, haar_idwt, privatize,
    reconstruct, slice, solve_numeric, tv_bound, ColorSpace, FlipProbabilities, PixelImage,
    RandomnessSpec, WeightTable,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const BIN: &str = env!("CARGO_BIN_EXE_pixel-ldp");

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn random_image(rng: &mut StdRng) -> PixelImage {
    let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
    let cs = [ColorSpace::Gray, ColorSpace::Rgb, ColorSpace::YCbCr][rng.gen_range(0..3)];
    let samples = (0..w * h * cs.channels()).map(|_| rng.gen()).collect();
    PixelImage::new(w, h, cs, samples).unwrap()
}

fn criterion_1() -> Outcome {
    let (ok, elapsed) = timed(|| {
        let all = PixelImage::gray(256, 1, (0..=255).collect()).unwrap();
        let mut ok = reconstruct(&slice(&all)).unwrap() == all;
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let img = random_image(&mut rng);
            ok &= reconstruct(&slice(&img)).unwrap() == img;
        }
        ok
    });
    Outcome {
        id: 1,
        name: "bit-plane slicing is exact",
        pass: ok && elapsed < Duration::from_secs(1),
        detail: format!("256 values + 1000 images exact = {ok}, {elapsed:?} (< 1 s)"),
    }
}

/// Edge-replicated even-sized copy, built independently of the transform.
fn pad_even(m: &Matrix) -> Matrix {
    let (r, c) = (m.rows + m.rows % 2, m.cols + m.cols % 2);
    let data = (0..r * c)
        .map(|i| m.at((i / c).min(m.rows - 1), (i % c).min(m.cols - 1)))
        .collect();
    Matrix::new(r, c, data).unwrap()
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let ((worst_err, worst_parseval), elapsed) = timed(|| {
        let (mut worst_err, mut worst_parseval) = (0.0f64, 0.0f64);
        for _ in 0..500 {
            let (r, c) = (rng.gen_range(1..=33), rng.gen_range(1..=33));
            let m = Matrix::new(
                r,
                c,
                (0..r * c).map(|_| rng.gen_range(-255.0..255.0)).collect(),
            )
            .unwrap();
            let bands = haar_dwt(&m).unwrap();
            let back = haar_idwt(&bands).unwrap();
            for (x, y) in m.data.iter().zip(&back.data) {
                worst_err = worst_err.max((x - y).abs());
            }
            let source = pad_even(&m).energy();
            worst_parseval = worst_parseval.max((bands.energy() - source).abs() / source);
        }
        (worst_err, worst_parseval)
    });
    Outcome {
        id: 2,
        name: "Haar roundtrip and Parseval",
        pass: worst_err <= 1e-9 && worst_parseval <= 1e-6 && elapsed < Duration::from_secs(1),
        detail: format!(
            "max |idwt(dwt(x)) - x| = {worst_err:.2e} (<= 1e-9), max Parseval rel. err = {worst_parseval:.2e} (<= 1e-6), {elapsed:?}"
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let ((entry, kkt, sum), elapsed) = timed(|| {
        let (mut entry, mut kkt, mut sum) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..100 {
            let bits: [f64; 8] = std::array::from_fn(|_| rng.gen_range(0.01..1000.0));
            let weights = if i % 4 == 0 {
                WeightTable::new(vec![rng.gen_range(0.01..100.0)], bits).unwrap()
            } else {
                WeightTable::new((0..3).map(|_| rng.gen_range(0.01..100.0)).collect(), bits)
                    .unwrap()
            };
            let total = rng.gen_range(0.1..100.0);
            let closed = allocate(total, &weights).unwrap();
            let numeric = solve_numeric(total, &weights).unwrap();
            for ((_, a), (_, b)) in closed.iter().zip(numeric.iter()) {
                entry = entry.max((a - b).abs());
            }
            let ratios: Vec<f64> = closed
                .iter()
                .map(|((c, b), e)| weights.weight(c, b) / (e * e))
                .collect();
            let (lo, hi) = ratios
                .iter()
                .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            kkt = kkt.max((hi - lo) / lo);
            sum = sum.max((closed.sum() - total).abs());
        }
        (entry, kkt, sum)
    });
    Outcome {
        id: 3,
        name: "closed-form allocation matches numeric oracle",
        pass: entry <= 1e-6 && kkt <= 1e-6 && sum <= 1e-9 && elapsed < Duration::from_secs(10),
        detail: format!(
            "max entry diff = {entry:.2e} (<= 1e-6), KKT spread = {kkt:.2e} (<= 1e-6), |Σε - ε_total| = {sum:.2e} (<= 1e-9), {elapsed:?}"
        ),
    }
}

fn criterion_4() -> Outcome {
    let rand = RandomnessSpec::new(4);
    let ((honest, control), elapsed) = timed(|| {
        let alloc = allocate(20.0, &WeightTable::default_color()).unwrap();
        let honest =
            certify_planes(&plane_claims(&alloc), 1_000_000, &rand, DEFAULT_CONFIDENCE).unwrap();
        let control = certify_randomizer(
            3f64.ln(),
            FlipProbabilities::with_keep(0.9),
            1_000_000,
            &rand,
            DEFAULT_CONFIDENCE,
        )
        .unwrap();
        (honest, control)
    });
    let passed = honest.planes.iter().filter(|r| r.pass).count();
    Outcome {
        id: 4,
        name: "per-bit ε-LDP certification",
        pass: passed == 24 && honest.planes.len() == 24 && !control.pass && elapsed < Duration::from_secs(120),
        detail: format!(
            "{passed}/24 planes pass at 10^6 trials; miscalibrated p=0.9 vs ln 3 rejected = {} (lower bound {:.3}), {elapsed:?}",
            !control.pass, control.ci_lower
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let ((worst_excess, worst_tight), elapsed) = timed(|| {
        let mut worst_excess = f64::NEG_INFINITY;
        for _ in 0..50 {
            let depth = rng.gen_range(1..=4);
            let eps: Vec<f64> = (0..depth).map(|_| rng.gen_range(0.0..3.0)).collect();
            let bound = tv_bound(eps.iter().sum()).unwrap();
            for x in 0..1u32 << depth {
                for y in 0..1u32 << depth {
                    let tv = exact_tv_reduced(&eps, x, y).unwrap();
                    worst_excess = worst_excess.max(tv - bound);
                }
            }
        }
        let mut worst_tight = 0.0f64;
        for i in 0..=100 {
            let e = i as f64 * 0.1;
            let tv = exact_tv_reduced(&[e], 0, 1).unwrap();
            worst_tight = worst_tight.max((tv - tv_bound(e).unwrap()).abs());
        }
        (worst_excess, worst_tight)
    });
    Outcome {
        id: 5,
        name: "TV bound valid and tight",
        pass: worst_excess <= 1e-12 && worst_tight <= 1e-12 && elapsed < Duration::from_secs(10),
        detail: format!(
            "max(TV - tanh(Σε/2)) = {worst_excess:.2e} (<= 1e-12); d=1 |TV - bound| = {worst_tight:.2e}, {elapsed:?}"
        ),
    }
}

fn criterion_6() -> Outcome {
    let block = blocklevel_to_pixel_epsilon(0.5, 8, 8, 3, 1).unwrap();
    let ratio = block / 20.0;
    Outcome {
        id: 6,
        name: "block-level conversion",
        pass: block == 94.5
            && (ratio - 4.725).abs() < 1e-12
            && (ratio * 10.0).round() / 10.0 == 4.7,
        detail: format!("ε_pixel = {block} (= 94.5), ratio vs 20 = {ratio} (≈ 4.7)"),
    }
}

fn criterion_7() -> Outcome {
    let img = synthetic_scene(112, 112);
    let budgets = [1.0, 2.4, 5.2, 12.0, 20.0, 32.0, 58.0];
    let (sweep, elapsed) = timed(|| monotone_psnr_sweep(&img, &budgets, 10, false).unwrap());
    let means: Vec<String> = sweep.means.iter().map(|m| format!("{m:.3}")).collect();
    Outcome {
        id: 7,
        name: "PSNR non-decreasing in ε_total",
        pass: sweep.is_non_decreasing() && elapsed < Duration::from_secs(60),
        detail: format!(
            "mean PSNR over 10 seeds: [{}] dB, {elapsed:?}",
            means.join(", ")
        ),
    }
}

/// Bit depth and color type from a PNG IHDR chunk.
fn png_header(path: &Path) -> (u32, u32, u8, u8) {
    let bytes = std::fs::read(path).unwrap();
    let be = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().unwrap());
    (be(16), be(20), bytes[24], bytes[25])
}

fn criterion_8() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    let corpus = fixture_dir();
    // Color fixtures go through the default pipeline, grayscale ones with --grayscale.
    for (name, gray) in [
        ("face_112.png", false),
        ("odd_33x17.png", false),
        ("gray_64x48.png", true),
    ] {
        let input = corpus.join(name);
        let mut cmd = Command::new(BIN);
        cmd.args(["privatize", "--epsilon", "20", "--seed", "8"])
            .arg(&input)
            .arg("-o")
            .arg(out.path());
        if gray {
            cmd.arg("--grayscale");
        }
        let status = cmd.output().unwrap().status;
        let produced = out.path().join(name);
        let same = status.success() && png_header(&input) == png_header(&produced);
        let decoded = read_image(&produced, AlphaPolicy::Reject).ok();
        let src = read_image(&input, AlphaPolicy::Reject).unwrap();
        let same = same
            && decoded.is_some_and(|d| {
                (d.width(), d.height(), d.channels()) == (src.width(), src.height(), src.channels())
            });
        ok &= same;
        notes.push(format!(
            "{name}: {}",
            if same { "same" } else { "DIFFERENT" }
        ));
    }
    // Binary PPM keeps its format too.
    let ppm_in = corpus.join("tiny.ppm");
    let status = Command::new(BIN)
        .args(["privatize", "--seed", "8"])
        .arg(&ppm_in)
        .arg("-o")
        .arg(out.path())
        .output()
        .unwrap()
        .status;
    let ppm_same = status.success()
        && std::fs::metadata(out.path().join("tiny.ppm"))
            .unwrap()
            .len()
            == std::fs::metadata(&ppm_in).unwrap().len();
    ok &= ppm_same;
    notes.push(format!(
        "tiny.ppm: {}",
        if ppm_same { "same" } else { "DIFFERENT" }
    ));
    Outcome {
        id: 8,
        name: "zero storage overhead",
        pass: ok,
        detail: format!("dimensions, channels and bit depth: {}", notes.join(", ")),
    }
}

fn criterion_9() -> Outcome {
    let img = synthetic_scene(112, 112);
    let alloc = allocate(20.0, &WeightTable::default_color()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mean = pool.install(|| {
        privatize(&img, &alloc, &RandomnessSpec::new(0), true).unwrap();
        let runs = 100u32;
        let start = Instant::now();
        for seed in 0..runs {
            privatize(&img, &alloc, &RandomnessSpec::new(seed as u64), true).unwrap();
        }
        start.elapsed() / runs
    });
    Outcome {
        id: 9,
        name: "throughput",
        pass: mean < Duration::from_millis(50),
        detail: format!("112x112 color, single thread, mean of 100 runs = {mean:?} (< 50 ms)"),
    }
}

fn criterion_10() -> Outcome {
    let inputs = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(10);
    let mut paths = Vec::new();
    for i in 0..20 {
        let (w, h) = (rng.gen_range(16..80), rng.gen_range(16..80));
        let img = PixelImage::rgb(w, h, (0..w * h * 3).map(|_| rng.gen()).collect()).unwrap();
        let path = inputs.path().join(format!("img{i:02}.png"));
        write_image(&img, &path).unwrap();
        paths.push(path);
    }
    let run = |workers: &str| {
        let out = tempfile::tempdir().unwrap();
        let status = Command::new(BIN)
            .args(["privatize", "--seed", "99", "--workers", workers])
            .args(&paths)
            .arg("-o")
            .arg(out.path())
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        let files: Vec<Vec<u8>> = (0..20)
            .flat_map(|i| {
                [format!("img{i:02}.png"), format!("img{i:02}.report.json")]
                    .map(|n| std::fs::read(out.path().join(n)).unwrap())
            })
            .collect();
        files
    };
    let (one, eight) = (run("1"), run("8"));
    let identical = one == eight;
    Outcome {
        id: 10,
        name: "determinism under parallelism",
        pass: identical && one.len() == 40,
        detail: format!("20 images, 1 vs 8 workers byte-identical = {identical}"),
    }
}

#[test]
fn acceptance() {
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    for o in &outcomes {
        println!(
            "[{}] criterion {:>2} {}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
