fn main() {
    println!("pods");
}
