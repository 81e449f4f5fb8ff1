#include "msfem/cli/run.hpp"

int main(int argc, char** argv)
{
    return msfem::cli::main_entry(argc, argv);
}
