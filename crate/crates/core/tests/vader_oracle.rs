//! Compound scores frozen from the reference Python implementation
//! (vaderSentiment 3.3.2) by `tests/oracles/vader_reference.py`. The
//! reference rounds to four decimals.

use survey_core::lsde::vader::VaderScorer;

const CASES: &[(&str, f64)] = &[
    ("i love it", 0.6369),
    ("VADER is smart, handsome, and funny.", 0.8316),
    ("VADER is smart, handsome, and funny!", 0.8439),
    ("VADER is very smart, handsome, and funny.", 0.8545),
    ("VADER is VERY SMART, handsome, and FUNNY.", 0.9227),
    ("VADER is VERY SMART, handsome, and FUNNY!!!", 0.9342),
    ("VADER is VERY SMART, uber handsome, and FRIGGIN FUNNY!!!", 0.9469),
    ("VADER is not smart, handsome, nor funny.", -0.7424),
    ("The book was good.", 0.4404),
    ("At least it isn't a horrible book.", 0.431),
    ("The book was only kind of good.", 0.3832),
    ("The plot was good, but the characters are uncompelling and the dialog is not great.", -0.7042),
    ("Today SUX!", -0.5461),
    ("Today only kinda sux! But I'll get by, lol", 0.5249),
    ("Make sure you :) or :D today!", 0.8633),
    ("Catch utf-8 emoji such as 💘 and 💋 and 😁", 0.875),
    ("Not bad at all", 0.431),
    ("ok", 0.296),
    ("It's fine I guess", 0.2023),
    ("Honestly my first semester was rough and I felt really lonely in the dorms.", 0.0534),
    ("I never felt welcome, no one talked to me and it was awful", -0.5562),
    ("The food is terrible.", -0.4767),
    ("I absolutely loved my time in Hamilton Hall!!", 0.6982),
    ("Advising was confusing, I never knew who to ask about my major requirements.", -0.2263),
    ("This class is the shit", 0.6124),
    ("That professor is a bad ass and the lab is kiss of death", 0.0),
    ("Without a doubt the best semester, yeah right", 0.5122),
    ("I don't really hate it but it's not great either?", -0.5161),
    ("least happy I have ever been", -0.4585),
    ("no problems at all", 0.3089),
    ("It was the least bit helpful", 0.4215),
    ("WOW this is AMAZING", 0.8769),
    ("the dorm was extremely dirty and hardly clean", -0.1989),
    ("", 0.0),
    ("??? !!!", 0.0),
    ("I'm sort of happy, somewhat tired, and barely coping", 0.2023),
    ("never so good", 0.5777),
    ("without a doubt great", 0.7359),
    ("Honestly I absolutely loved it. Last semester in Hamilton Hall my friends and I started a study group with Professor Reyes, and we felt so welcomed and happy every single week.", 0.9543),
];

#[test]
fn compound_matches_reference() {
    let vader = VaderScorer::new();
    let mut failures = Vec::new();
    for (text, expected) in CASES {
        let got = vader.polarity_scores(text).compound;
        if (got - expected).abs() > 5e-5 {
            failures.push(format!("{text:?}: got {got:.6}, reference {expected}"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn compound_is_bounded() {
    let vader = VaderScorer::new();
    for (text, _) in CASES {
        let c = vader.polarity_scores(text).compound;
        assert!((-1.0..=1.0).contains(&c));
    }
}
