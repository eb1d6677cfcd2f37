fn main() {
    let path = std::env::args().nth(1).unwrap();
    let data = pinn_core::train::load_checkpoint(std::path::Path::new(&path)).unwrap();
    if let Some(lp) = data.state.params.segment_by_name("embed.log_p_t") {
        println!("log_p_t = {:.4} -> P_t = {:.5} (target 2*pi/80 = {:.5})", lp[0], lp[0].exp(), std::f64::consts::TAU / 80.0);
    }
}
