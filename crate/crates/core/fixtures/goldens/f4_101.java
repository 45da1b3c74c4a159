import java.util.stream.IntStream;

public class Candidate {
    static float[] a = new float[256];
    static float[] b = new float[256];
    static float[] c = new float[256];
    static float[] d = new float[256];
    static int t;
    static int i;

    static void main() {
        // @gpu-transfer batch=0 h2d b before-loop0 multiplicity=1
        // @gpu-transfer batch=1 d2h d after-loop0 multiplicity=1
        for (t = 0; t < 8; t++) {
            // @gpu-transfer batch=2 d2h a after-loop1 multiplicity=8
            IntStream.range(0, 256).parallel().forEach(i -> {
                a[i] = b[i] * 2.0;
            });
            for (i = 0; i < 256; i++) {
                c[i] = a[i] + c[i];
            }
            // @gpu-transfer batch=3 h2d c before-loop3 multiplicity=8
            IntStream.range(0, 256).parallel().forEach(i -> {
                d[i] = c[i] * 0.5;
            });
        }
        report(d);
    }
}
