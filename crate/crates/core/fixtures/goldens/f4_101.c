float a[256];
float b[256];
float c[256];
float d[256];
int t;
int i;

void main() {
    #pragma acc data copy(b)
    #pragma acc data copyout(d)
    for (t = 0; t < 8; t++) [cpu=1.0, gpu=1.0, valid=true] {
        #pragma acc data copyout(a)
        #pragma acc parallel loop present(b)
        for (i = 0; i < 256; i++) [cpu=4.0, gpu=0.5, valid=true] {
            a[i] = b[i] * 2.0;
        }
        for (i = 0; i < 256; i++) [cpu=3.0, gpu=0.4, valid=true] {
            c[i] = a[i] + c[i];
        }
        #pragma acc data copy(c)
        #pragma acc parallel loop present(d)
        for (i = 0; i < 256; i++) [cpu=5.0, gpu=0.25, valid=true] {
            d[i] = c[i] * 0.5;
        }
    }
    report(d) [cpu=100.0];
}
