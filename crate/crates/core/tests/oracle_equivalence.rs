use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zzmorse::field::Field;
use zzmorse::generators::{random_stream, RandomStreamParams};
use zzmorse::oracle::{oracle_diagram, DEFAULT_CELL_LIMIT};
use zzmorse::pipeline::{run_stream, RunOptions};

fn check(seed: u64, p: u64, validate: bool) {
    let field = Field::new(p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = random_stream(&mut rng, RandomStreamParams::default());
    let want = oracle_diagram(&field, &blocks, DEFAULT_CELL_LIMIT).unwrap();
    for morse in [true, false] {
        let opts = RunOptions { field, morse, validate };
        let got = run_stream(&blocks, opts).unwrap_or_else(|e| panic!("seed {seed} p {p} morse {morse}: {e}\n{blocks:?}"));
        assert_eq!(got.diagram.triples(), want, "seed {seed} p {p} morse {morse}\n{blocks:?}");
    }
}

#[test]
fn random_streams_match_oracle() {
    for seed in 0..200 {
        for p in [2, 3, 5] {
            check(seed, p, true);
        }
    }
}
