use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyteller_core::text::*;

/// Sentences where `x` and `y` always appear together over a shared pool of
/// filler words, while `z` only ever appears with its own fillers.
fn cooccurrence_corpus(vocab: &mut Option<Vocab>) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shared = ["a", "b", "c", "d", "e", "f"];
    let apart = ["p", "q", "r", "s", "t", "u"];
    let mut sentences: Vec<Vec<String>> = Vec::new();
    for i in 0..300 {
        let mut s: Vec<String> = (0..4).map(|_| shared[rng.gen_range(0..shared.len())].to_string()).collect();
        if i % 2 == 0 {
            s.insert(rng.gen_range(0..4), "x".into());
            let at = s.iter().position(|w| w == "x").unwrap();
            s.insert(at + 1, "y".into());
        } else {
            let mut t: Vec<String> = (0..5).map(|_| apart[rng.gen_range(0..apart.len())].to_string()).collect();
            t.insert(rng.gen_range(0..5), "z".into());
            s = t;
        }
        sentences.push(s);
    }
    let v = Vocab::build(&sentences, 1);
    let ids = sentences.iter().map(|s| v.ids_of(s)).collect();
    *vocab = Some(v);
    ids
}

#[test]
fn cooccurring_words_end_up_closer() {
    let mut vocab = None;
    let corpus = cooccurrence_corpus(&mut vocab);
    let vocab = vocab.unwrap();
    let cfg = SkipGramConfig {
        embed_dim: 16,
        window: 2,
        negatives: 3,
        epochs: 15,
        lr: 0.05,
        seed: 9,
    };
    let out = train_skipgram(&corpus, vocab.len(), &cfg).unwrap();
    let row = |w: &str| out.table.row(vocab.id(w)).to_vec();
    let (x, y, z) = (row("x"), row("y"), row("z"));
    let xy = cosine(&x, &y);
    let xz = cosine(&x, &z);
    assert!(xy > xz, "cos(x,y) = {xy}, cos(x,z) = {xz}");
}

#[test]
fn epoch_loss_never_increases_on_a_fixed_corpus() {
    let mut vocab = None;
    let corpus = &cooccurrence_corpus(&mut vocab)[..40];
    let vocab = vocab.unwrap();
    for seed in [1, 2, 3, 4, 5] {
        let cfg = SkipGramConfig {
            embed_dim: 8,
            window: 2,
            negatives: 2,
            epochs: 10,
            lr: 0.025,
            seed,
        };
        let losses = train_skipgram(corpus, vocab.len(), &cfg).unwrap().epoch_losses;
        for w in losses.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: {losses:?}");
        }
    }
}

#[test]
fn tokenize_examples() {
    assert_eq!(
        tokenize("This is a picture of a store."),
        vec!["this", "is", "a", "picture", "of", "a", "store", "."]
    );
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("Don't stop"), vec!["don", "'", "t", "stop"]);
}

#[test]
fn vocab_examples() {
    let corpus = vec![vec!["a", "a", "b"]];
    let v = Vocab::build(&corpus, 1);
    assert_eq!((v.id("a"), v.id("b")), (4, 5));
    let v2 = Vocab::build(&corpus, 2);
    assert_eq!(v2.id("b"), UNK);
}
