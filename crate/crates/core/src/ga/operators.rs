use std::cmp::Ordering;

use rand::Rng;

use super::GaParams;
use crate::pattern::Genome;

/// Attempts to draw a genome not yet in the population before accepting a duplicate.
const DUPLICATE_RETRIES: usize = 32;

pub fn init_population(a: usize, params: &GaParams, rng: &mut impl Rng) -> Vec<Genome> {
    let mut population: Vec<Genome> = Vec::with_capacity(params.population_size);
    for _ in 0..params.population_size {
        let mut g = random_genome(a, rng);
        for _ in 0..DUPLICATE_RETRIES {
            if !population.contains(&g) {
                break;
            }
            g = random_genome(a, rng);
        }
        population.push(g);
    }
    population
}

fn random_genome(a: usize, rng: &mut impl Rng) -> Genome {
    Genome::new((0..a).map(|_| rng.gen::<bool>()).collect())
}

/// Orders by time (INFEASIBLE last), then fewer GPU bits, then genome.
pub(crate) fn rank(a: (&Genome, Option<f64>), b: (&Genome, Option<f64>)) -> Ordering {
    let time = match (a.1, b.1) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    time.then(a.0.gpu_count().cmp(&b.0.gpu_count())).then(a.0.cmp(b.0))
}

/// Index drawn with probability proportional to 1/time.
fn roulette(times: &[Option<f64>], rng: &mut impl Rng) -> usize {
    let zero: Vec<usize> = (0..times.len()).filter(|&i| times[i] == Some(0.0)).collect();
    if !zero.is_empty() {
        return zero[rng.gen_range(0..zero.len())];
    }
    let weights: Vec<f64> = times.iter().map(|t| t.map_or(0.0, |t| 1.0 / t)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return rng.gen_range(0..times.len());
    }
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if x < *w {
                return i;
            }
            x -= w;
        }
    }
    // Rounding left a sliver past the last weight.
    weights.iter().rposition(|w| *w > 0.0).expect("positive total")
}

/// Elites are kept in their original order; `elite_count` is clamped to the population size.
pub fn next_generation(
    population: &[Genome],
    times: &[Option<f64>],
    params: &GaParams,
    rng: &mut impl Rng,
) -> Vec<Genome> {
    assert_eq!(population.len(), times.len(), "one fitness per individual");
    let n = population.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| rank((&population[i], times[i]), (&population[j], times[j])).then(i.cmp(&j)));
    let mut elite: Vec<usize> = order.into_iter().take(params.elite_count.min(n)).collect();
    elite.sort();

    let mut next: Vec<Genome> = elite.iter().map(|&i| population[i].clone()).collect();
    while next.len() < params.population_size {
        let p1 = &population[roulette(times, rng)];
        let p2 = &population[roulette(times, rng)];
        let a = p1.len();
        let mut child = if a >= 2 && rng.gen::<f64>() < params.crossover_rate {
            let cut = rng.gen_range(1..a);
            Genome::new(p1.bits()[..cut].iter().chain(&p2.bits()[cut..]).copied().collect())
        } else {
            p1.clone()
        };
        for bit in child.bits_mut() {
            if rng.gen::<f64>() < params.mutation_rate_per_bit {
                *bit = !*bit;
            }
        }
        next.push(child);
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_is_reproducible() {
        let p = GaParams { population_size: 8, ..GaParams::default() };
        assert_eq!(init_population(3, &p, &mut rng(7)), init_population(3, &p, &mut rng(7)));
        let pop = init_population(3, &p, &mut rng(7));
        // 8 distinct 3-bit genomes exist, so the retries find all of them.
        let mut uniq = pop.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 8);
    }

    #[test]
    fn tiny_space_allows_duplicates() {
        let p = GaParams { population_size: 4, ..GaParams::default() };
        let pop = init_population(1, &p, &mut rng(1));
        assert_eq!(pop.len(), 4);
        assert!(pop.iter().all(|g| g.len() == 1));
    }

    #[test]
    fn bit_frequency_is_fair() {
        let p = GaParams { population_size: 10_000, ..GaParams::default() };
        // a = 40 keeps duplicates (and thus retries) out of the picture.
        let pop = init_population(40, &p, &mut rng(3));
        let ones: usize = pop.iter().map(|g| g.gpu_count()).sum();
        let freq = ones as f64 / (40.0 * 10_000.0);
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
        let first: usize = pop.iter().filter(|g| g.bits()[0]).count();
        assert!((first as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn all_operators_disabled_is_identity() {
        let pop: Vec<Genome> = ["101", "000", "111", "010"].iter().map(|s| s.parse().unwrap()).collect();
        let times = [Some(3.0), None, Some(1.0), Some(2.0)];
        let p = GaParams { population_size: 4, elite_count: 4, crossover_rate: 0.0, mutation_rate_per_bit: 0.0, ..GaParams::default() };
        assert_eq!(next_generation(&pop, &times, &p, &mut rng(0)), pop);
    }

    #[test]
    fn single_feasible_takes_all_mass() {
        let times = [None, None, Some(5.0), None];
        let mut r = rng(11);
        for _ in 0..500 {
            assert_eq!(roulette(&times, &mut r), 2);
        }
        let pop: Vec<Genome> = ["00", "01", "10", "11"].iter().map(|s| s.parse().unwrap()).collect();
        let p = GaParams { population_size: 50, crossover_rate: 0.0, mutation_rate_per_bit: 0.0, elite_count: 0, ..GaParams::default() };
        assert!(next_generation(&pop, &times, &p, &mut r).iter().all(|g| g.to_string() == "10"));
    }

    #[test]
    fn all_infeasible_selects_uniformly() {
        let times = [None; 4];
        let mut r = rng(5);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[roulette(&times, &mut r)] += 1;
        }
        assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
    }

    #[test]
    fn roulette_follows_inverse_time() {
        let times = [Some(1.0), Some(3.0)];
        let mut r = rng(9);
        let first = (0..20_000).filter(|_| roulette(&times, &mut r) == 0).count();
        // weights 1 and 1/3: P(first) = 0.75
        assert!((first as f64 / 20_000.0 - 0.75).abs() < 0.02);
    }

    #[test]
    fn zero_time_wins_outright() {
        let times = [Some(1.0), Some(0.0), None];
        let mut r = rng(2);
        assert!((0..100).all(|_| roulette(&times, &mut r) == 1));
    }

    #[test]
    fn ranking() {
        let g = |s: &str| s.parse::<Genome>().unwrap();
        assert_eq!(rank((&g("11"), Some(1.0)), (&g("00"), Some(2.0))), Ordering::Less);
        assert_eq!(rank((&g("11"), Some(1.0)), (&g("01"), Some(1.0))), Ordering::Greater);
        assert_eq!(rank((&g("10"), Some(1.0)), (&g("01"), Some(1.0))), Ordering::Greater);
        assert_eq!(rank((&g("00"), None), (&g("11"), Some(9.0))), Ordering::Greater);
    }
}
