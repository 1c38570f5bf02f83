use ndarray::Array2;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, reps: usize) {
    let a = Array2::<f32>::from_elem((m, k), 1.001);
    let b = Array2::<f32>::from_elem((k, n), 0.999);
    let t0 = Instant::now();
    let mut acc = 0.0f32;
    for _ in 0..reps {
        let c = a.dot(&b);
        acc += c[[0, 0]];
    }
    let dt = t0.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * n * reps) as f64 / dt;
    println!("{}x{}x{} reps={} -> {:.2} GFLOPS (sink {})", m, k, n, reps, flops / 1e9, acc);
}

fn main() {
    bench(11040, 128, 1024, 8); // 32 grasp states of 345 rows, layer 128->1024
    bench(11040, 4, 64, 64);
    bench(11040, 64, 128, 32);
    bench(4096, 64, 128, 32); // push stack shape, 4 states of 1024 rows
    let threads = std::thread::available_parallelism().unwrap();
    println!("available_parallelism = {}", threads);
}
