#include <iostream>
int main(){std::cout << "uvd placeholder\n";}
