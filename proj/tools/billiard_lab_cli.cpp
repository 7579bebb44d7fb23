#include "CLI11.hpp"

#include "billiard_lab/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for outer billiards around circular sectors"};
    app.require_subcommand(1);
    billiard_lab::cli::register_all(app);
    CLI11_PARSE(app, argc, argv);
    return 0;
}
