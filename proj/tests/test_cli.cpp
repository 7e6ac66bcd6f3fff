#include "doctest.h"
int main_placeholder() { return 0; }
