#include "afem/driver.hpp"

int main(int argc, char** argv)
{
    return afem::cli_main(argc, argv);
}
