#include <vector>
using namespace std;
int count_odd(vector<int> v) {
    int c = 0;
    for (int i = 0; i < (int)v.size(); i++) {
        if (v[i] % 2 == 0) continue;
        c++;
    }
    return c;
}
