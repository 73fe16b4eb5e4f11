use clap::Parser;

fn main() {
    let code = match doeblin::Cli::try_parse() {
        Ok(cli) => doeblin::run(cli),
        Err(e) => {
            // clap would exit with 2, which is reserved for NotMinorizable.
            let _ = e.print();
            if e.use_stderr() {
                doeblin::exit::CONFIG
            } else {
                doeblin::exit::OK
            }
        }
    };
    std::process::exit(code);
}
