#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ticketsim::corpus::{Corpus, Ticket, Timestamp};
use ticketsim::eval::CardPosition;

pub const CATEGORIES: [(&str, [&str; 8]); 10] = [
    (
        "vpn",
        [
            "vpn",
            "tunnel",
            "remote",
            "anyconnect",
            "token",
            "gateway",
            "offsite",
            "connect",
        ],
    ),
    (
        "printer",
        [
            "printer",
            "toner",
            "paper",
            "jam",
            "tray",
            "spooler",
            "print",
            "cartridge",
        ],
    ),
    (
        "email",
        [
            "email",
            "outlook",
            "mailbox",
            "inbox",
            "attachment",
            "smtp",
            "mail",
            "calendar",
        ],
    ),
    (
        "password",
        [
            "password",
            "reset",
            "expired",
            "locked",
            "login",
            "credentials",
            "account",
            "unlock",
        ],
    ),
    (
        "network",
        [
            "wifi", "wireless", "router", "switch", "cable", "ethernet", "dns", "latency",
        ],
    ),
    (
        "disk",
        [
            "disk",
            "storage",
            "drive",
            "quota",
            "space",
            "partition",
            "volume",
            "backup",
        ],
    ),
    (
        "software",
        [
            "install",
            "license",
            "upgrade",
            "version",
            "setup",
            "package",
            "installer",
            "update",
        ],
    ),
    (
        "phone",
        [
            "phone",
            "voip",
            "headset",
            "extension",
            "dial",
            "voicemail",
            "call",
            "handset",
        ],
    ),
    (
        "hardware",
        [
            "laptop", "monitor", "keyboard", "mouse", "screen", "docking", "battery", "charger",
        ],
    ),
    (
        "database",
        [
            "database", "sql", "query", "table", "oracle", "schema", "index", "deadlock",
        ],
    ),
];

const FILLER: [&str; 16] = [
    "please", "help", "urgent", "issue", "problem", "user", "today", "since", "morning", "again", "not", "working",
    "cannot", "office", "team", "need",
];

fn day(n: usize) -> Timestamp {
    let base = chrono::NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    let date = base + chrono::Days::new(n as u64);
    Timestamp(date.and_hms_opt(9, 0, 0).unwrap())
}

/// One template ticket: two category words as title, four category words
/// mixed with four filler words as description.
pub fn template_ticket(rng: &mut ChaCha8Rng, id: String, category: usize, n: usize) -> Ticket {
    let (name, words) = CATEGORIES[category];
    let title: Vec<&str> = words.choose_multiple(rng, 2).copied().collect();
    let mut desc: Vec<&str> = words.choose_multiple(rng, 4).copied().collect();
    desc.extend(FILLER.choose_multiple(rng, 4).copied());
    desc.shuffle(rng);
    let mut t = Ticket::new(id, title.join(" "), desc.join(" "));
    t.category = Some(name.to_string());
    t.solution = Some(format!("resolved {name} issue"));
    t.date_open = Some(day(n));
    t
}

/// `per_category` tickets for each of the 10 categories, interleaved.
pub fn training_corpus(per_category: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tickets = Vec::new();
    for _ in 0..per_category {
        for c in 0..CATEGORIES.len() {
            let n = tickets.len();
            tickets.push(template_ticket(&mut rng, format!("TR{n:04}"), c, n));
        }
    }
    Corpus::from_tickets(tickets).unwrap()
}

/// Three subgroups of 100 labelled tickets (10 per category) with card
/// positions that cluster each category around its own point.
pub fn labelled_set(seed: u64) -> (Corpus, Vec<CardPosition>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tickets = Vec::new();
    let mut positions = Vec::new();
    for sub in 0..3u32 {
        let mut order: Vec<(usize, usize)> = (0..CATEGORIES.len())
            .flat_map(|c| (0..10).map(move |i| (c, i)))
            .collect();
        order.shuffle(&mut rng);
        for (c, i) in order {
            let id = format!("S{sub}C{c}N{i}");
            let n = tickets.len();
            tickets.push(template_ticket(&mut rng, id.clone(), c, n));
            let angle = 2.0 * PI * c as f64 / CATEGORIES.len() as f64;
            positions.push(CardPosition {
                external_id: id,
                x: 100.0 * angle.cos() + rng.gen_range(-5.0..5.0),
                y: 100.0 * angle.sin() + rng.gen_range(-5.0..5.0),
                subgroup: sub,
            });
        }
    }
    (Corpus::from_tickets(tickets).unwrap(), positions)
}

/// Lexicon mapping each category name to its template words.
pub fn lexicon_json() -> String {
    let map: BTreeMap<String, Vec<&str>> = CATEGORIES
        .iter()
        .map(|(name, words)| {
            let canonical = format!("topic_{name}");
            (canonical, words.to_vec())
        })
        .collect();
    serde_json::to_string_pretty(&map).unwrap()
}

pub fn write_positions_dir(dir: &Path, positions: &[CardPosition]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut by_group: BTreeMap<u32, String> = BTreeMap::new();
    for p in positions {
        by_group
            .entry(p.subgroup)
            .or_insert_with(|| "external_id,x,y\n".to_string())
            .push_str(&format!("{},{},{}\n", p.external_id, p.x, p.y));
    }
    for (g, body) in by_group {
        std::fs::write(dir.join(format!("{g}.csv")), body).unwrap();
    }
}

/// A precomputed vector file: category one-hot plus per-ticket noise.
pub fn write_category_vectors(path: &Path, corpus: &Corpus, provider: &str, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = CATEGORIES.len() + 2;
    let mut out = format!("{{\"provider\":\"{provider}\",\"dim\":{dim}}}\n");
    for t in corpus.iter() {
        let c = CATEGORIES
            .iter()
            .position(|(n, _)| Some(*n) == t.category.as_deref())
            .unwrap();
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..0.3)).collect();
        v[c] += 1.0;
        out.push_str(&serde_json::json!({ "external_id": t.external_id, "values": v }).to_string());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}
